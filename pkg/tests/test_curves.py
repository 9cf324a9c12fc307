import math

import numpy as np
import pytest

from hplanes.curves import (
    CurveError,
    CurveKind,
    IdealCurve,
    NonSimpleCurveError,
    RoundCircle,
    angular_hausdorff,
    build_curve,
    circle_curve,
    ellipse_curve,
    fourier_curve,
    normalize_curve,
    open_hemisphere_contains,
    polyline_angular_distance,
    resample,
    rotation_between,
    side_of,
)

NORTH = np.array([0.0, 0.0, 1.0])


def _figure_eight(n: int = 64) -> np.ndarray:
    t = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False) + 0.013
    points = np.column_stack([0.5 * np.sin(t), 0.5 * np.sin(t) * np.cos(t), np.ones(n)])
    return points / np.linalg.norm(points, axis=1)[:, None]


def test__curves__circle_samples_lie_on_the_round_circle():
    curve = circle_curve(angular_radius=1.0, n=64)

    angles = np.arccos(np.clip(curve.points @ NORTH, -1.0, 1.0))
    np.testing.assert_allclose(angles, 1.0, atol=1e-12)
    assert len(curve) == 64
    assert curve.name == 'circle'
    assert curve.length == pytest.approx(2.0 * math.pi * math.sin(1.0), rel=1e-3)


def test__curves__axis_lies_on_the_positive_side():
    curve = circle_curve(n=128)

    np.testing.assert_allclose(curve.axis(), NORTH, atol=1e-9)
    assert side_of(curve, [NORTH, -NORTH]).tolist() == [1, -1]
    assert curve.normal_at(0) @ NORTH > 0.0


def test__curves__reversed_keeps_the_positive_region():
    curve = fourier_curve((0.1, 0.05), n=128)
    backwards = curve.reversed()

    assert backwards.orientation == -1
    assert side_of(backwards, [NORTH, -NORTH]).tolist() == [1, -1]
    np.testing.assert_allclose(backwards.axis(), curve.axis(), atol=1e-9)
    np.testing.assert_allclose(backwards.smooth_point(), curve.smooth_point())


def test__curves__rejects_too_few_samples():
    with pytest.raises(CurveError):
        circle_curve(n=8)


def test__curves__rejects_large_gaps():
    points = circle_curve(n=64).points
    sparse = np.delete(points, np.arange(1, 11), axis=0)

    with pytest.raises(CurveError):
        IdealCurve.from_points(sparse)


def test__curves__rejects_self_crossing_polyline():
    with pytest.raises(NonSimpleCurveError):
        IdealCurve.from_points(_figure_eight())


def test__curves__model_validation_checks_points():
    with pytest.raises(ValueError):
        IdealCurve(points=_figure_eight())


def test__curves__rejects_bad_smooth_index():
    with pytest.raises(CurveError):
        IdealCurve.from_points(circle_curve(n=32).points, smooth_index=32)


def test__curves__ellipse_extends_to_its_semi_axes():
    curve = ellipse_curve((1.75, 1.35), n=256)

    polar = np.arccos(np.clip(curve.points @ NORTH, -1.0, 1.0))
    assert polar.max() == pytest.approx(1.75, abs=1e-9)
    assert polar.min() == pytest.approx(1.35, abs=1e-4)
    with pytest.raises(CurveError):
        ellipse_curve((3.5, 1.0))


def test__curves__fourier_rejects_perturbation_through_pole():
    with pytest.raises(CurveError):
        fourier_curve((2.0,), n=64)


def test__curves__round_circle_cap_membership():
    circle = RoundCircle.from_axis([0.0, 0.0, 2.0], 0.5)

    assert circle.axis.z == pytest.approx(1.0)
    assert circle.in_axis_cap([NORTH, -NORTH]).tolist() == [True, False]
    np.testing.assert_allclose(circle.sample(16) @ NORTH, math.cos(0.5), atol=1e-12)
    with pytest.raises(CurveError):
        RoundCircle.from_axis(NORTH, 0.0)


def test__curves__rotation_between_maps_directions():
    source = np.array([1.0, 2.0, 2.0]) / 3.0
    for target in (NORTH, -source, source):
        moved = rotation_between(source, target).apply(source)
        np.testing.assert_allclose(moved, target, atol=1e-12)


def test__curves__resample_is_uniform_in_arclength():
    curve = ellipse_curve(n=256)

    points = resample(curve.points, 100)
    steps = np.arccos(np.clip(np.sum(points * np.roll(points, -1, axis=0), axis=1), -1.0, 1.0))

    np.testing.assert_allclose(np.linalg.norm(points, axis=1), 1.0, atol=1e-12)
    assert steps.max() / steps.min() < 1.01


def test__curves__angular_distances():
    equator = circle_curve(n=256)
    tilted = circle_curve(angular_radius=math.pi / 2 - 0.1, n=256)

    distances = polyline_angular_distance([NORTH, [1.0, 0.0, 0.0]], equator.points)

    assert distances[0] == pytest.approx(math.pi / 2, abs=1e-9)
    assert distances[1] == pytest.approx(0.0, abs=1e-9)
    assert angular_hausdorff(equator.points, tilted.points) == pytest.approx(0.1, abs=1e-3)


def test__curves__normalize_moves_axis_to_north():
    curve = circle_curve(axis=[1.0, 0.0, 0.0], angular_radius=1.2, n=128)

    normalized, isometry = normalize_curve(curve)

    np.testing.assert_allclose(normalized.axis(), NORTH, atol=1e-9)
    np.testing.assert_allclose(isometry.rotation.apply([1.0, 0.0, 0.0]), NORTH, atol=1e-12)


def test__curves__normalize_recentres_a_curve_in_a_hemisphere():
    curve = circle_curve(axis=[1.0, 0.0, 0.0], angular_radius=0.8, n=128)

    normalized, isometry = normalize_curve(curve)

    assert open_hemisphere_contains(curve)
    assert not open_hemisphere_contains(normalized)
    assert isometry.center[0] > 0.0
    # a round circle is recentred onto the equator
    np.testing.assert_allclose(normalized.points[:, 2], 0.0, atol=1e-5)
    np.testing.assert_allclose(isometry.apply(curve.points), normalized.points, atol=1e-9)
    np.testing.assert_allclose(isometry.inverse(normalized.points), curve.points, atol=1e-9)


def test__curves__normalize_keeps_centred_curves_in_place():
    curve = circle_curve(axis=[0.0, 1.0, 0.0], n=64)

    _, isometry = normalize_curve(curve)

    assert isometry.center == (0.0, 0.0, 0.0)


def test__curves__open_hemisphere_detection():
    assert open_hemisphere_contains(circle_curve(angular_radius=1.0, n=64))
    assert not open_hemisphere_contains(circle_curve(n=64))


@pytest.mark.parametrize(
    ('kind', 'options'),
    [
        (CurveKind.CIRCLE, {'angular_radius': 1.2}),
        (CurveKind.ELLIPSE, {'semi_axes': (1.7, 1.4)}),
        (CurveKind.FOURIER, {'coefficients': (0.15, 0.1, 0.05)}),
    ],
)
def test__curves__build_curve(kind, options):
    curve = build_curve(kind, 256, smooth_index=7, **options)

    assert curve.name == str(kind)
    assert len(curve) == 256
    assert curve.smooth_index == 7
