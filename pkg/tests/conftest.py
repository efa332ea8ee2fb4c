import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from epcore.twolevel import TwoLevelParams

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile("default")


@pytest.fixture
def dimer_params():
    return TwoLevelParams.canonical_dimer()


@pytest.fixture
def dimer(dimer_params):
    return dimer_params.family()


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


def random_params(rng, min_coupling=0.1):
    """Random complex two-level parameters with ``|d1 d2| > min_coupling``."""
    while True:
        z = rng.normal(size=6) + 1j * rng.normal(size=6)
        p = TwoLevelParams(*z)
        if abs(p.d1 * p.d2) > min_coupling and abs(p.w1 - p.w2) > 0.1:
            return p
