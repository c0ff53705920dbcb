import sys
import time
from dataclasses import dataclass
from pathlib import Path

import pytest

from observerlab.harness.cli import main


@dataclass
class CliRun:
    out: Path
    code: int
    elapsed: float


def _run(out, *args):
    t0 = time.perf_counter()
    code = main(["compare", "--out", str(out), "--seed", "1", *args])
    return CliRun(out, code, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def compare_noisy(tmp_path_factory):
    """Full six-observer comparison with measurement noise and figures."""
    return _run(tmp_path_factory.mktemp("compare_noisy"), "--noise", "on")


@pytest.fixture(scope="session")
def compare_noisy_repeat(tmp_path_factory):
    """Second run with the same seed, for the determinism check."""
    return _run(tmp_path_factory.mktemp("compare_noisy_repeat"), "--noise", "on")


@pytest.fixture(scope="session")
def compare_noiseless(tmp_path_factory):
    return _run(tmp_path_factory.mktemp("compare_noiseless"), "--noise", "off", "--no-plots")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
