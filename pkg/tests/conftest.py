import numpy as np
import pytest

from fsosim.turbulence import TurbulenceRegime


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=list(TurbulenceRegime), ids=lambda r: r.value)
def regime(request):
    return request.param


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: trains networks or runs large Monte Carlo loops")
