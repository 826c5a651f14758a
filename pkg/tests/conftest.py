import functools

import pytest

from tmfrac.measure import MeasureParams, make_grid

ACCEPTANCE_LINES = []


def record(label: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@functools.lru_cache(maxsize=None)
def params(p=2.0, theta=1.0):
    return MeasureParams(p, theta)


@functools.lru_cache(maxsize=None)
def grid(p=2.0, theta=1.0, r_out=10.0, n=1024, grading="hybrid", r_min=1e-6):
    return make_grid(params(p, theta), r_out, n, grading, r_min=r_min)


@functools.lru_cache(maxsize=None)
def green(eta=0.0, p=2.0, theta=1.0, n=4096):
    from tmfrac.asymptotics import green_grid, solve_green
    P = params(p, theta)
    return solve_green(eta, P, green_grid(P, 20.0, n, 1e-10))


@pytest.fixture
def P21():
    return params(2.0, 1.0)


@pytest.fixture
def P32():
    return params(3.0, 2.0)
