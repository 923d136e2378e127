import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gptlab import _kernels

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(autouse=True, scope="session")
def _compiled_kernels():
    _kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
