import numpy as np
import pytest

from fasmodel import covariance
from fasmodel.covariance import FasConfig

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def headline():
    """N=100, W=1, sigma2=10 scenario with its spectrum."""
    cfg = FasConfig(100, 1.0, 10.0)
    return cfg, covariance.spectral_model(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
