import numpy as np
import pytest

from ridepark import SF_ANCHORS, MarketParams, calibrate, printed_sf_params

TOY = dict(lambda0=600.0, n0=50.0, k0=20.0, m_coeff=10.0, alpha=1.0, epsilon=0.2, c0=20.0,
           eta=0.5, w0=20.0, sigma=0.5, u0=0.0, cruise_cost=8.0, mu=20.0)


@pytest.fixture(scope="session")
def toy():
    return MarketParams(**TOY)


@pytest.fixture(scope="session")
def toy_dict():
    return dict(TOY)


@pytest.fixture(scope="session")
def sf():
    """San Francisco parameters fitted so the K = 0 observations are the optimum."""
    return calibrate(printed_sf_params(mu=1.0), SF_ANCHORS, fit_optimality=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20260115)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
