import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def paraboloid_h1(domain=((0.0, 1.0), (0.0, 1.0))):
    from hmeasure.surface import ParamSurface
    return ParamSurface.from_strings(1, ["u1", "u2", "(u1^2+u2^2)/2"], domain)
