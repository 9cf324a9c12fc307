import math

import numpy as np
import pytest

from hplanes.catenoid import (
    catenoid_profile,
    coaxial_annulus,
    coaxial_circles,
    existence_threshold,
)
from hplanes.hyperbolic import InvalidParameterError


def test__catenoid__small_profile_is_a_euclidean_catenary():
    neck = 1e-3

    profile = catenoid_profile(neck, height=neck)

    assert profile.reached
    assert profile.radii[0] == pytest.approx(neck)
    assert profile.heights[-1] == neck
    assert profile.radius_at(neck) == pytest.approx(neck * math.cosh(1.0), rel=1e-3)
    assert np.all(np.diff(profile.heights) > 0.0)


def test__catenoid__points_are_mirror_symmetric():
    profile = catenoid_profile(0.4, height=0.2, samples=50)

    points = profile.points(segments=16)

    assert points.shape == (99, 16, 3)
    np.testing.assert_allclose(points[::-1, :, 2], -points[:, :, 2], atol=1e-15)
    np.testing.assert_allclose(np.linalg.norm(points[49, :, :2], axis=1), 0.4)


def test__catenoid__annulus_meets_the_circles():
    profile = coaxial_annulus(0.2, 0.5)

    assert profile.reached
    assert profile.radii[-1] == pytest.approx(0.5, abs=1e-8)
    assert 0.0 < profile.neck_radius < 0.5


def test__catenoid__existence_threshold_separates_solvable_heights():
    threshold = existence_threshold(0.5, tolerance=1e-6)

    assert 0.0 < threshold < math.sqrt(0.75)
    coaxial_annulus(0.9 * threshold, 0.5)
    with pytest.raises(InvalidParameterError):
        coaxial_annulus(min(1.1 * threshold, 0.86), 0.5)


@pytest.mark.parametrize(
    ('neck', 'height'),
    [(0.0, 0.1), (1.0, 0.1), (0.3, 0.0)],
)
def test__catenoid__profile_rejects_bad_parameters(neck, height):
    with pytest.raises(InvalidParameterError):
        catenoid_profile(neck, height)


def test__catenoid__annulus_rejects_circles_outside_the_ball():
    with pytest.raises(InvalidParameterError):
        coaxial_annulus(0.8, 0.7)


def test__catenoid__coaxial_circles_share_azimuths():
    upper, lower = coaxial_circles(0.3, 0.4, segments=12)

    assert upper.shape == lower.shape == (12, 3)
    np.testing.assert_allclose(upper[:, :2], lower[:, :2])
    np.testing.assert_allclose(upper[:, 2], 0.3)
    np.testing.assert_allclose(lower[:, 2], -0.3)
    np.testing.assert_allclose(np.linalg.norm(upper[:, :2], axis=1), 0.4)
