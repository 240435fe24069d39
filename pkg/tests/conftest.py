import time
from contextlib import contextmanager

import pytest

from homegeo.plateau import minimize_area_annulus, nil_graph_spec, sol_spec

ACCEPTANCE_LINES = []


@contextmanager
def criterion(number: int, title: str, budget_s: float):
    """Time a block and record one pass/fail line for the acceptance summary."""
    t0 = time.perf_counter()
    ok = False
    detail = {}
    try:
        yield detail
        ok = True
    finally:
        dt = time.perf_counter() - t0
        within = dt < budget_s
        status = "PASS" if ok and within else "FAIL"
        extra = ", ".join(f"{k}={v}" for k, v in detail.items())
        line = f"criterion {number:2d} {status}  {title}  ({dt:.1f}s of {budget_s:g}s)"
        if extra:
            line += f"  [{extra}]"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
    assert within, f"criterion {number} exceeded its {budget_s} s budget ({dt:.1f} s)"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sol_result():
    return minimize_area_annulus(sol_spec().space, spec=sol_spec())


@pytest.fixture(scope="session")
def nil_result():
    spec = nil_graph_spec()
    return minimize_area_annulus(spec.space, spec=spec)
