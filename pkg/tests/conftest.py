import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# JIT warm-up on first call makes wall-clock deadlines meaningless
settings.register_profile(
    "polarnoma",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("polarnoma")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
