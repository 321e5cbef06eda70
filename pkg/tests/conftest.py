import warnings

import pytest
from hypothesis import HealthCheck, settings

from unirenorm.errors import PrecisionWarning
from unirenorm.solver import fixed_point

settings.register_profile(
    "default",
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def fp2():
    """Doubling fixed point at alpha = 2, degree 60."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PrecisionWarning)
        return fixed_point(2.0)


@pytest.fixture(scope="session")
def spec2(fp2):
    from unirenorm.spectral import spectral_report

    return spectral_report(fp2)
