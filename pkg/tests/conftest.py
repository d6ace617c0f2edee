import math

import numpy as np
import pytest

from onum.core import Instance, Network, linear_arrival, log_arrival, make_value_function
from onum.allocator import run_online


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timing checks measure steady-state work."""
    from onum.baselines import ReservationParams, run_greedy, run_reservation

    inst = Instance(Network(2), (log_arrival(2.0, (0, 1), 0.5), linear_arrival(1.0, (0,), 0.3)))
    vf = make_value_function(1.0, math.e)
    run_online(inst, vf)
    run_greedy(inst)
    run_reservation(inst, ReservationParams(0.5, 0.5, 2.0))


@pytest.fixture
def vf_e():
    return make_value_function(1.0, math.e)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per criterion; the lines are echoed in the run summary."""

    def report(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        print(line)
        _ACCEPTANCE.append(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
