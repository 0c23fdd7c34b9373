from __future__ import annotations

import time

import numpy as np
import pytest

from morrey import GridSpec
from morrey.extremal import SolverConfig, solve_extremal

CRITERIA: list[tuple[str, bool, str]] = []

REF2 = GridSpec(2, 8.0, 1 / 16, 4.0)
REF3 = GridSpec(3, 4.0, 1 / 8, 4.0)
REF3_FINE = GridSpec(3, 4.0, 1 / 16, 4.0)


class ConstraintWatch:
    """Callback recording the worst pin / boundary deviation over all iterates."""

    def __init__(self, spec: GridSpec, pins=(1.0, -1.0)):
        self.spec = spec
        self.pins = pins
        self.boundary = spec.boundary_mask()
        self.calls = 0
        self.exact = True

    def __call__(self, it, values):
        self.calls += 1
        ok = (values[self.spec.north] == self.pins[0] and values[self.spec.south] == self.pins[1]
              and not np.any(values[self.boundary] != 0.0))
        self.exact &= bool(ok)


class Solved:
    def __init__(self, spec: GridSpec, cfg: SolverConfig | None = None):
        self.watch = ConstraintWatch(spec)
        t0 = time.perf_counter()
        self.sol = solve_extremal(spec, cfg, callback=self.watch)
        self.seconds = time.perf_counter() - t0


@pytest.fixture(scope="session")
def ref2() -> Solved:
    return Solved(REF2)


@pytest.fixture(scope="session")
def ref3() -> Solved:
    return Solved(REF3)


@pytest.fixture(scope="session")
def ref3_fine() -> Solved:
    return Solved(REF3_FINE)


@pytest.fixture
def criterion(request):
    """``criterion(label, passed, detail)`` records one acceptance line."""

    def record(label: str, passed: bool, detail: str = "") -> None:
        CRITERIA.append((label, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in CRITERIA:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}")

