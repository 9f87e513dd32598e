from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from sketchsynth.lang import parse

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")

CORPUS = Path(__file__).resolve().parent.parent / "src" / "sketchsynth" / "corpus"
BENCHMARKS = ("simple", "loop", "loopcond", "welfare", "salesman")
ALL_SKETCHES = BENCHMARKS + ("loop2", "empty_correct")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def load(name: str):
    return parse((CORPUS / f"{name}.pmls").read_text())


@pytest.fixture(scope="session")
def corpus():
    return {name: load(name) for name in ALL_SKETCHES}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})")
