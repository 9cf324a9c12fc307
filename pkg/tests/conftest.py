import pytest

from hplanes.curves import IdealCurve, circle_curve


@pytest.fixture(scope='session')
def equator() -> IdealCurve:
    """Return the finely sampled equator, shared by the geometric checks."""
    return circle_curve(n=256)
