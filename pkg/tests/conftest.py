import numpy as np
import pytest

from sconclab.semiconcave import make_function
from sconclab.tonelli import make_system


@pytest.fixture(scope="session")
def free1():
    return make_system("free", d=1)


@pytest.fixture(scope="session")
def free2():
    return make_system("free", d=2)


@pytest.fixture(scope="session")
def pendulum():
    return make_system("mechanical", d=1, potential="cos", amplitude=-1.0)


@pytest.fixture(scope="session")
def negnorm1():
    return make_function("neg-norm", d=1)


@pytest.fixture(scope="session")
def negnorm2():
    return make_function("neg-norm", d=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import SUMMARY
    except ImportError:
        return
    if SUMMARY:
        terminalreporter.section("acceptance criteria")
        for line in SUMMARY:
            terminalreporter.write_line(line)
