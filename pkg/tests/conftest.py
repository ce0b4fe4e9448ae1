import numpy as np
import pytest

from nonloclab import make_bump_density, make_fractional_density, momentum_matrix


@pytest.fixture(scope="session")
def bump1():
    return make_bump_density(1)


@pytest.fixture(scope="session")
def bump2():
    return make_bump_density(2)


@pytest.fixture(scope="session")
def frac75():
    return make_fractional_density(0.75, dim=1)


@pytest.fixture(scope="session")
def m1(bump1):
    return momentum_matrix(bump1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
