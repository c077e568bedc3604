import pytest
from hypothesis import HealthCheck, settings

from stochsynth.automata import ProductAbstraction, bistable_predicates, load_automaton
from stochsynth.config import shipped_path
from stochsynth.system import bistable_switch

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def bistable():
    return bistable_switch()


@pytest.fixture(scope="session")
def preds():
    return bistable_predicates()


@pytest.fixture(scope="session")
def phi1():
    return load_automaton(shipped_path("phi1.aut"))


@pytest.fixture(scope="session")
def phi2():
    return load_automaton(shipped_path("phi2.aut"))


def two_state(kind):
    """Two abstract states; x1 may move to x2, x2 is absorbing; Büchi on x2."""
    if kind == "A":
        over, under = [[[0, 1]], [[1]]], [[[0, 1]], [[1]]]
    else:
        over, under = [[[0, 1]], [[1]]], [[[]], [[1]]]
    return ProductAbstraction.from_sets(over, under, [1, 2])


@pytest.fixture
def s_a():
    return two_state("A")


@pytest.fixture
def s_b():
    return two_state("B")


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
