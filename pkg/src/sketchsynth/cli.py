"""Command-line interface: ``sketchsynth synth|check|brute|bench``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import featexp as fx
from .arp import SynthesisReport, brute_force, synthesize
from .checker import ASSERT, CheckerError, StateCapExceeded, check, format_trace, resolve_property, trace_to_dict
from .graph import GraphError, build_fpg, to_dot
from .lang import DesugarError, ParseError, parse, render
from .lang.ast import Model
from .transform import TransformError, abstract_join, family_of, model_holes, rewrite_holes

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_RESOURCE = 0, 2, 3, 4
STATE_CAP_ENV = "SKETCHSYNTH_STATE_CAP"

BENCHMARKS = ("simple", "loop", "loopcond", "welfare", "salesman")

# Reference call counts and times (seconds) from the original evaluation,
# keyed by benchmark then bit width: (arp calls, arp time, brute calls, brute time).
REFERENCE = {
    "simple": {3: (2, 0.319, 8, 0.648), 4: (2, 0.351, 16, 1.250), 8: (2, 0.373, 256, 19.24)},
    "loop": {3: (4, 0.638, 8, 0.614), 4: (4, 0.658, 16, 1.228), 8: (4, 1.667, 256, 18.95)},
    "loopcond": {3: (2, 0.392, 8, 0.639), 4: (2, 0.448, 16, 1.251), 8: (2, 0.778, 256, 19.64)},
    "welfare": {3: (4, 0.660, 8, 0.650), 4: (5, 0.923, 16, 1.205), 8: (10, 1.476, 256, 19.69)},
    "salesman": {3: (2, 0.406, 8, 0.689), 4: (2, 0.417, 16, 1.359), 8: (2, 0.424, 256, 19.41)},
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    input: Optional[Path] = None
    prop: Optional[str] = None  # ltl property name, "assert", or None for the default
    bits: list[int] = field(default_factory=lambda: [3])
    mode: str = "first-found"
    state_cap: Optional[int] = None
    emit_family: Optional[Path] = None
    emit_abstract: Optional[Path] = None
    emit_trace: Optional[Path] = None
    emit_dot: Optional[Path] = None
    output: str = "text"
    corpus: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.command not in ("synth", "check", "brute", "bench"):
            raise UsageError(f"unknown command {self.command!r}")
        for b in self.bits:
            if not 1 <= b <= 16:
                raise UsageError(f"--bits must be within 1..16, got {b}")
        if self.state_cap is not None and self.state_cap < 1:
            raise UsageError("--state-cap must be positive")


def corpus_dir() -> Path:
    return Path(str(resources.files("sketchsynth") / "corpus"))


def _bits(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid bit width {text!r}") from None
    if not 1 <= value <= 16:
        raise argparse.ArgumentTypeError(f"bit width must be within 1..16, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchsynth", description="Complete integer holes in model sketches.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, multi_bits: bool = False) -> None:
        group = p.add_mutually_exclusive_group()
        group.add_argument("--prop", metavar="NAME", help="ltl property to verify")
        group.add_argument("--assert", dest="assert_mode", action="store_true",
                           help="verify the model's assertions")
        if multi_bits:
            p.add_argument("--bits", type=_bits, nargs="+", default=[3, 4, 8], metavar="N")
        else:
            p.add_argument("--bits", type=_bits, default=3, metavar="N",
                           help="width of holes without an explicit domain (default 3)")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--state-cap", type=int, metavar="N",
                       help=f"state budget per checker call (fallback: ${STATE_CAP_ENV})")
        p.add_argument("--seed-order", choices=["default"], default="default",
                       help="successor ordering (reserved)")

    def emits(p: argparse.ArgumentParser) -> None:
        p.add_argument("--emit-family", type=Path, metavar="FILE")
        p.add_argument("--emit-abstract", type=Path, metavar="FILE")
        p.add_argument("--emit-trace", type=Path, metavar="FILE")
        p.add_argument("--emit-dot", type=Path, metavar="FILE")

    p = sub.add_parser("synth", help="synthesize hole values by abstraction refinement")
    p.add_argument("input", type=Path)
    p.add_argument("--all", action="store_true", help="classify every completion")
    common(p)
    emits(p)

    p = sub.add_parser("check", help="verify a plain model or the abstraction of a family")
    p.add_argument("input", type=Path)
    common(p)
    emits(p)

    p = sub.add_parser("brute", help="verify every completion one by one")
    p.add_argument("input", type=Path)
    common(p)
    emits(p)

    p = sub.add_parser("bench", help="compare refinement and enumeration on the corpus")
    p.add_argument("--corpus", type=Path, help="directory with the benchmark sketches")
    common(p, multi_bits=True)
    return parser


def config_from_args(ns: argparse.Namespace, env: Optional[dict] = None) -> RunConfig:
    env = os.environ if env is None else env
    cap = ns.state_cap
    if cap is None and env.get(STATE_CAP_ENV):
        try:
            cap = int(env[STATE_CAP_ENV])
        except ValueError:
            raise UsageError(f"${STATE_CAP_ENV} must be an integer") from None
    prop = "assert" if ns.assert_mode else ns.prop
    bits = ns.bits if isinstance(ns.bits, list) else [ns.bits]
    return RunConfig(
        command=ns.command,
        input=getattr(ns, "input", None),
        prop=prop,
        bits=bits,
        mode="all" if getattr(ns, "all", False) else "first-found",
        state_cap=cap,
        emit_family=getattr(ns, "emit_family", None),
        emit_abstract=getattr(ns, "emit_abstract", None),
        emit_trace=getattr(ns, "emit_trace", None),
        emit_dot=getattr(ns, "emit_dot", None),
        output="json" if ns.json else "text",
        corpus=getattr(ns, "corpus", None),
    )


# ---------------------------------------------------------------------------


def _load(path: Path) -> Model:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err.strerror}") from None
    return parse(text)


def _write(path: Optional[Path], text: str) -> None:
    if path is not None:
        path.write_text(text, encoding="utf-8")


def _emit_models(cfg: RunConfig, sketch: Model) -> None:
    if not (cfg.emit_family or cfg.emit_abstract or cfg.emit_dot):
        return
    fam = rewrite_holes(sketch, cfg.bits[0]) if model_holes(sketch) else family_of(sketch)
    abstract = abstract_join(fam)
    _write(cfg.emit_family, render(fam.model))
    _write(cfg.emit_abstract, render(abstract))
    if cfg.emit_dot:
        _write(cfg.emit_dot, to_dot(build_fpg(abstract)))


def report_text(r: SynthesisReport, source: str = "") -> str:
    holes = ", ".join(f"{name} (hole {i})" for i, name in sorted(r.holes.items()))
    doms = ", ".join(f"{f.name} in [{f.lo},{f.hi}]" for f in r.space.features)
    lines = []
    if source:
        lines.append(f"sketch:      {source}")
    lines += [
        f"property:    {r.property}",
        f"features:    {doms or '(none)'}" + (f"  <- {holes}" if holes else ""),
        f"space size:  {r.space.size}",
        f"method:      {r.method} ({r.mode})",
    ]
    if r.correct:
        lines.append("correct:     " + " | ".join(fx.render_box(r.space, b) for b in r.correct))
    else:
        lines.append("correct:     none")
    lines.append(f"refuted:     {len(r.incorrect)} sub-famil{'y' if len(r.incorrect) == 1 else 'ies'}")
    lines.append(f"checker calls: {r.checker_calls}   spurious refinements: "
                 f"{r.spurious_refinements}   recursion depth: {r.recursion_depth}")
    lines.append(f"time:        {r.wall_time:.3f}s")
    return "\n".join(lines) + "\n"


def _emit_report_traces(cfg: RunConfig, r: SynthesisReport) -> None:
    if cfg.emit_trace is None:
        return
    chunks = []
    for psi, t in r.incorrect:
        chunks.append(f"# counterexample for {fx.render(psi)}\n{format_trace(t)}")
    report = {"incorrect": [{"expr": fx.render(psi), "trace": trace_to_dict(t)}
                            for psi, t in r.incorrect]}
    chunks.append("# report\n" + json.dumps(report, sort_keys=True))
    _write(cfg.emit_trace, "\n".join(chunks) + "\n")


def run_synth(cfg: RunConfig, out) -> int:
    sketch = _load(cfg.input)
    _emit_models(cfg, sketch)
    if cfg.command == "brute":
        r = brute_force(sketch, cfg.prop, cfg.bits[0], cfg.state_cap)
    else:
        r = synthesize(sketch, cfg.prop, cfg.bits[0], cfg.mode, cfg.state_cap)
    _emit_report_traces(cfg, r)
    if cfg.output == "json":
        out.write(json.dumps(r.to_dict(), indent=2, sort_keys=True) + "\n")
    else:
        out.write(report_text(r, str(cfg.input)))
    return EXIT_OK


def run_check(cfg: RunConfig, out) -> int:
    model = _load(cfg.input)
    if model_holes(model):
        raise UsageError("model contains holes; use 'synth' or 'brute'")
    _emit_models(cfg, model)
    fam = family_of(model)
    prop = resolve_property(fam.model, cfg.prop)
    start = time.perf_counter()
    result = check(abstract_join(fam), prop, cfg.state_cap)
    elapsed = time.perf_counter() - start
    if cfg.emit_trace and result.trace is not None:
        _write(cfg.emit_trace, format_trace(result.trace) + "# report\n"
               + json.dumps(trace_to_dict(result.trace), sort_keys=True) + "\n")
    name = "assert" if prop is ASSERT else prop.name
    if cfg.output == "json":
        doc = {"schema": 1, "property": name, "satisfied": result.satisfied, "kind": result.kind,
               "states": result.states, "wall_time": elapsed,
               "trace": trace_to_dict(result.trace) if result.trace else None}
        out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        verdict = "satisfied" if result.satisfied else f"violated ({result.kind})"
        out.write(f"property:  {name}\nverdict:   {verdict}\nstates:    {result.states}\n")
        if result.trace is not None:
            out.write(format_trace(result.trace))
    return EXIT_OK


def run_bench(cfg: RunConfig, out) -> int:
    folder = cfg.corpus or corpus_dir()
    rows = []
    for bits in cfg.bits:
        for name in BENCHMARKS:
            sketch = _load(folder / f"{name}.pmls")
            a = synthesize(sketch, cfg.prop, bits, "first-found", cfg.state_cap)
            b = brute_force(sketch, cfg.prop, bits, cfg.state_cap)
            ref = REFERENCE.get(name, {}).get(bits)
            rows.append({
                "benchmark": name, "bits": bits,
                "arp_calls": a.checker_calls, "arp_time": a.wall_time,
                "brute_calls": b.checker_calls, "brute_time": b.wall_time,
                "speedup": b.wall_time / a.wall_time if a.wall_time > 0 else None,
                "correct": [fx.render_box(a.space, x) for x in a.correct],
                "ref_arp_calls": ref[0] if ref else None, "ref_arp_time": ref[1] if ref else None,
                "ref_brute_calls": ref[2] if ref else None, "ref_brute_time": ref[3] if ref else None,
            })
    if cfg.output == "json":
        out.write(json.dumps({"schema": 1, "rows": rows}, indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    head = (f"{'benchmark':<10} {'bits':>4} | {'arp calls':>9} {'time':>8} | {'brute calls':>11} "
            f"{'time':>8} | {'speedup':>7} | {'ref arp':>7} {'ref brute':>9}")
    out.write(head + "\n" + "-" * len(head) + "\n")
    for r in rows:
        speed = f"{r['speedup']:.1f}x" if r["speedup"] else "-"
        ref_a = "-" if r["ref_arp_calls"] is None else str(r["ref_arp_calls"])
        ref_b = "-" if r["ref_brute_calls"] is None else str(r["ref_brute_calls"])
        out.write(f"{r['benchmark']:<10} {r['bits']:>4} | {r['arp_calls']:>9} {r['arp_time']:>7.3f}s"
                  f" | {r['brute_calls']:>11} {r['brute_time']:>7.3f}s | {speed:>7} | "
                  f"{ref_a:>7} {ref_b:>9}\n")
    out.write("times cover graph construction and checking; reference columns list the "
              "call counts of the original tool\n")
    return EXIT_OK


def run(cfg: RunConfig, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        if cfg.command == "bench":
            return run_bench(cfg, out)
        if cfg.command == "check":
            return run_check(cfg, out)
        return run_synth(cfg, out)
    except UsageError as e:
        err.write(f"sketchsynth: error: {e}\n")
        return EXIT_USAGE
    except KeyError as e:
        err.write(f"sketchsynth: error: {e.args[0]}\n")
        return EXIT_USAGE
    except ParseError as e:
        err.write(f"{cfg.input}:{e}\n")
        return EXIT_PARSE
    except (DesugarError, TransformError, GraphError, fx.FeatureError) as e:
        err.write(f"{cfg.input}: error: {e}\n")
        return EXIT_PARSE
    except StateCapExceeded as e:
        err.write(f"sketchsynth: resource limit: {e}\n")
        return EXIT_RESOURCE
    except CheckerError as e:
        err.write(f"sketchsynth: error: {e}\n")
        return EXIT_USAGE


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except UsageError as e:
        parser.error(str(e))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
