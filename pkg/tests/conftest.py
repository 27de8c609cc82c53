import sys
import numpy as np
import pytest

from cqfixed.geometry import DomainSet, Interval, two_disks
from cqfixed.maps import PiecewiseMap
from cqfixed.problemfile import load_example


@pytest.fixture(scope="session")
def disks():
    return two_disks()


@pytest.fixture(scope="session")
def unit():
    return DomainSet((Interval(0.0, 1.0),))


@pytest.fixture(scope="session")
def ex2_6():
    return load_example("ex2_6")


@pytest.fixture(scope="session")
def ex1_9():
    return load_example("ex1_9")


@pytest.fixture(scope="session")
def cq_def():
    return load_example("cq_def")


@pytest.fixture(scope="session")
def halving():
    """T x = x/2 on [-1, 1] with A = B = T, S = identity, q = 0."""
    from cqfixed.problem import Problem

    E = DomainSet((Interval(-1.0, 1.0),))
    T = PiecewiseMap.from_1d(E, [((-1, 1, True, True), [0, 0.5])], "T")
    return Problem(E, 0.0, T, T, PiecewiseMap.identity(E, "S"), T)


def rng(seed=12345):
    return np.random.default_rng(seed)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
