"""Shared full-length runs.  Each is computed at most once per session."""

import sys
import time

import pytest

from imcf.flow import TimeStepPolicy, run
from imcf.initial_data import cap, perturbed_cap

ACCEPTANCE_M = 401


class TimedRun:
    def __init__(self, result, seconds):
        self.result = result
        self.seconds = seconds

    @property
    def snapshots(self):
        return self.result.snapshots


def _timed(u0, policy):
    t0 = time.perf_counter()
    result = run(u0, policy)
    return TimedRun(result, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def cap_run_n2():
    return _timed(cap(2.0, ACCEPTANCE_M, "axisymmetric"), TimeStepPolicy(eps_H=0.05))


@pytest.fixture(scope="session")
def cap_run_n1():
    return _timed(cap(2.0, ACCEPTANCE_M, "interval"), TimeStepPolicy(eps_H=0.05))


@pytest.fixture(scope="session")
def perturbed_run():
    """perturbed_cap(2, 0.2) at m=401 to termination, with snapshots forced at t = 0.02 and 0.1."""
    return _timed(perturbed_cap(2.0, 0.2, ACCEPTANCE_M),
                  TimeStepPolicy(eps_H=0.05, record_times=(0.02, 0.1)))


@pytest.fixture(scope="session")
def perturbed_run_fine():
    """The same data at m=801, stopped at t = 0.1."""
    return _timed(perturbed_cap(2.0, 0.2, 2 * ACCEPTANCE_M - 1),
                  TimeStepPolicy(eps_H=0.05, t_max=0.1, record_times=(0.02, 0.1)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        for line in mod.RESULTS[number].splitlines():
            terminalreporter.write_line(line)
