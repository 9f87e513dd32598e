from __future__ import annotations

import json
import subprocess
import sys

import pytest

from sketchsynth.arp import SynthesisReport
from sketchsynth.cli import (
    EXIT_OK, EXIT_PARSE, EXIT_RESOURCE, EXIT_USAGE, STATE_CAP_ENV, RunConfig, UsageError, main, run,
)

from conftest import BENCHMARKS, CORPUS

SIMPLE = str(CORPUS / "simple.pmls")


def invoke(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def invoke_json(capsys, *argv):
    code, out, _ = invoke(capsys, *argv, "--json")
    assert code == EXIT_OK
    return json.loads(out)


# -- synth / brute / check ---------------------------------------------------------------


def test_synth_all_json_gives_the_correct_box(capsys):
    doc = invoke_json(capsys, "synth", SIMPLE, "--assert", "--bits", "3", "--all")
    assert doc["correct"] == [{"A": [0, 2]}]
    assert doc["mode"] == "all" and doc["schema"] == 1


def test_synth_first_found_uses_two_calls(capsys):
    doc = invoke_json(capsys, "synth", SIMPLE, "--assert", "--bits", "3")
    assert doc["checker_calls"] == 2 and doc["correct"] == [{"A": [0, 2]}]


def test_brute_eight_bits(capsys):
    doc = invoke_json(capsys, "brute", SIMPLE, "--assert", "--bits", "8")
    assert doc["checker_calls"] == 256 and doc["space_size"] == 256


def test_no_solution_is_a_valid_answer(capsys):
    code, out, _ = invoke(capsys, "synth", str(CORPUS / "empty_correct.pmls"), "--assert")
    assert code == EXIT_OK and "correct:     none" in out
    doc = invoke_json(capsys, "synth", str(CORPUS / "empty_correct.pmls"), "--assert")
    assert doc["correct"] == []


def test_text_report(capsys):
    code, out, _ = invoke(capsys, "synth", SIMPLE)
    assert code == EXIT_OK
    assert "0<=A<=2" in out and "checker calls: 2" in out and "A in [0,7]" in out


def test_ltl_property_by_name(capsys):
    doc = invoke_json(capsys, "synth", str(CORPUS / "salesman.pmls"), "--prop", "p", "--all")
    assert doc["property"] == "p"
    assert doc["correct"] == [{"A": [0, 3]}]


def test_check_plain_model(tmp_path, capsys):
    src = tmp_path / "m.pmls"
    src.write_text("byte x; init { x = 2; assert(x == 3) }")
    doc = invoke_json(capsys, "check", str(src))
    assert doc["satisfied"] is False and doc["kind"] == "safety" and doc["trace"]["stem"]


def test_check_family_uses_its_abstraction(tmp_path, capsys):
    src = tmp_path / "f.pmls"
    src.write_text("feature A : 0 .. 1; byte x; init { #if :: (A=1) -> x = 1 #endif; assert(x == 0) }")
    code, out, _ = invoke(capsys, "check", str(src))
    assert code == EXIT_OK and "violated (safety)" in out and "A=1" in out


def test_check_rejects_sketches(capsys):
    code, _, err = invoke(capsys, "check", SIMPLE)
    assert code == EXIT_USAGE and "holes" in err


# -- report format ------------------------------------------------------------------------


def test_json_report_round_trips(capsys):
    doc = invoke_json(capsys, "synth", SIMPLE, "--all")
    assert SynthesisReport.from_dict(doc).to_dict() == doc


def test_runs_are_identical_except_time(capsys):
    a = invoke_json(capsys, "synth", str(CORPUS / "loop.pmls"), "--all")
    b = invoke_json(capsys, "synth", str(CORPUS / "loop.pmls"), "--all")
    a.pop("wall_time"), b.pop("wall_time")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


# -- emit flags ----------------------------------------------------------------------------


def test_emit_flags_write_files(tmp_path, capsys):
    fam, ab, tr, dot = (tmp_path / n for n in ("fam.pmls", "abs.pmls", "trace.txt", "g.dot"))
    code, _, _ = invoke(capsys, "synth", SIMPLE, "--all", "--emit-family", str(fam),
                        "--emit-abstract", str(ab), "--emit-trace", str(tr), "--emit-dot", str(dot))
    assert code == EXIT_OK
    assert "#if" in fam.read_text() and ":: (A=7) ->" in fam.read_text()
    assert "#if" not in ab.read_text() and "/* A=7 */" in ab.read_text()
    text = tr.read_text()
    assert "# counterexample for A=" in text and " @ " in text and "# report" in text
    assert dot.read_text().startswith("digraph")


def test_emitted_family_parses_back(tmp_path, capsys):
    from sketchsynth.lang import parse
    fam = tmp_path / "fam.pmls"
    invoke(capsys, "synth", SIMPLE, "--emit-family", str(fam))
    assert parse(fam.read_text()).features


# -- exit codes ------------------------------------------------------------------------------


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.pmls"
    bad.write_text("init { do :: od }")
    code, _, err = invoke(capsys, "synth", str(bad))
    assert code == EXIT_PARSE and "bad.pmls:1:" in err


def test_missing_file_is_a_usage_error(tmp_path, capsys):
    code, _, err = invoke(capsys, "synth", str(tmp_path / "nope.pmls"))
    assert code == EXIT_USAGE and "cannot read" in err


def test_unknown_property_is_a_usage_error(capsys):
    code, _, err = invoke(capsys, "synth", str(CORPUS / "salesman.pmls"), "--prop", "q")
    assert code == EXIT_USAGE and "q" in err


def test_bad_bits_is_rejected(capsys):
    with pytest.raises(SystemExit) as info:
        main(["synth", SIMPLE, "--bits", "17"])
    assert info.value.code == EXIT_USAGE


def test_prop_and_assert_are_exclusive(capsys):
    with pytest.raises(SystemExit) as info:
        main(["synth", SIMPLE, "--assert", "--prop", "p"])
    assert info.value.code == EXIT_USAGE


def test_state_cap_exit_code(capsys):
    code, _, err = invoke(capsys, "synth", SIMPLE, "--state-cap", "5")
    assert code == EXIT_RESOURCE and "state cap" in err


def test_state_cap_from_environment(monkeypatch, capsys):
    monkeypatch.setenv(STATE_CAP_ENV, "5")
    code, _, _ = invoke(capsys, "brute", SIMPLE)
    assert code == EXIT_RESOURCE


def test_run_config_validates_bits():
    with pytest.raises(UsageError):
        RunConfig("synth", bits=[0])
    with pytest.raises(UsageError):
        RunConfig("fit")


def test_run_reports_to_given_streams(tmp_path):
    import io
    out, err = io.StringIO(), io.StringIO()
    assert run(RunConfig("synth", CORPUS / "loopcond.pmls", mode="all"), out, err) == EXIT_OK
    assert "0<=A<=1" in out.getvalue() and not err.getvalue()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sketchsynth", "synth", SIMPLE, "--json"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["correct"] == [{"A": [0, 2]}]


# -- bench -------------------------------------------------------------------------------------


def bench_rows(capsys, *bits):
    return invoke_json(capsys, "bench", "--bits", *map(str, bits))["rows"]


def test_bench_three_bits(capsys):
    rows = bench_rows(capsys, 3)
    assert [r["benchmark"] for r in rows] == list(BENCHMARKS)
    simple = rows[0]
    assert (simple["arp_calls"], simple["brute_calls"]) == (2, 8)
    assert simple["ref_arp_calls"] == 2 and simple["ref_brute_calls"] == 8


def test_bench_four_bits_brute_calls(capsys):
    assert all(r["brute_calls"] == 16 for r in bench_rows(capsys, 4))


def test_bench_text_table(capsys):
    code, out, _ = invoke(capsys, "bench", "--bits", "3")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert "arp calls" in lines[0] and "speedup" in lines[0]
    assert len([ln for ln in lines if "|" in ln]) == 1 + len(BENCHMARKS)


def test_bench_reports_speedup_as_time_ratio(capsys):
    for r in bench_rows(capsys, 8):
        assert r["speedup"] == pytest.approx(r["brute_time"] / r["arp_time"])


@pytest.mark.xfail(reason="the embedded checker has no per-call start-up cost, so wall-time "
                          "ratios stay far below the original tool's; times are informational",
                   strict=False)
def test_bench_eight_bit_speedup_on_simple_class(capsys):
    rows = {r["benchmark"]: r for r in bench_rows(capsys, 8)}
    for name in ("simple", "loopcond", "salesman"):
        assert rows[name]["speedup"] >= 10, name
