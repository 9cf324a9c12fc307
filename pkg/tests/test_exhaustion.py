import math

import numpy as np
import pytest

from hplanes import exhaustion
from hplanes.curves import RoundCircle, circle_curve, fourier_curve
from hplanes.exhaustion import (
    BarrierProfile,
    RadiusTooSmallError,
    annular_band,
    band_loop,
    barrier_annulus_init,
    boundary_curve,
    coaxial_frame,
    core_hausdorff,
    ideal_gap,
    nonseparating_check,
    probe_length,
    run_exhaustion,
    tau_circles,
    trace_circle,
)
from hplanes.hyperbolic import InvalidParameterError, geodesic_ball
from hplanes.mesh.generators import cone_fill, flat_disk
from hplanes.mesh.model import Topology
from hplanes.solver import SolverConfig, SolverError
from hplanes.umbilic import geodesic_plane_distance, supporting_halfspaces


@pytest.fixture(scope='module')
def circle():
    return circle_curve(n=64)


@pytest.fixture(scope='module')
def wavy():
    return fourier_curve((0.15, 0.1), n=96)


@pytest.fixture(scope='module')
def wavy_band(wavy):
    return annular_band(wavy, supporting_halfspaces(wavy, 0.3), 2.5)


def _solver_config() -> SolverConfig:
    return SolverConfig(ball=geodesic_ball(1.0), max_iterations=40)


def test__exhaustion__band_of_a_round_circle_is_thin(circle):
    flat = annular_band(circle, supporting_halfspaces(circle, 0.0), 2.0)
    shifted = annular_band(circle, supporting_halfspaces(circle, 0.3), 2.0)

    assert np.max(flat.widths) < 1e-6
    np.testing.assert_allclose(flat.lower, 0.0, atol=1e-6)
    assert np.max(shifted.widths) < 1e-6
    # the H > 0 band sits on the D⁻ side of the curve
    assert np.all(shifted.upper < 0.0)


def test__exhaustion__boundary_curve_lies_on_the_ball_sphere(circle):
    radius = geodesic_ball(2.0).euclidean_radius

    gamma = boundary_curve(circle, 0.0, 2.0)

    assert gamma.shape == (len(circle), 3)
    np.testing.assert_allclose(np.linalg.norm(gamma, axis=1), radius, rtol=1e-12)
    assert ideal_gap(gamma, circle) < 1e-5


def test__exhaustion__boundary_curve_rejects_samples_outside_the_band(circle):
    band = annular_band(circle, supporting_halfspaces(circle, 0.3), 3.0)
    # a band half a radian off the curve, as seen for curves too wild for the radius
    displaced = band.model_copy(update={'lower': band.lower + 0.5, 'upper': band.upper + 0.5})

    assert np.max(band.exit_distances()) < exhaustion.band_slack(0.3, 3.0)
    assert exhaustion.band_slack(0.0, 2.0) == pytest.approx(
        2.0 * math.asinh(2.0 * math.exp(-2.0)), abs=1e-5
    )
    boundary_curve(circle, 0.3, 3.0, band=band)
    with pytest.raises(RadiusTooSmallError, match='leaves the hull band'):
        boundary_curve(circle, 0.3, 3.0, band=displaced)


def test__exhaustion__band_contains_its_midline(wavy_band):
    midline = wavy_band.midline()

    assert np.all(wavy_band.widths >= 0.0)
    assert np.all(wavy_band.contains(midline))
    assert wavy_band.winding(midline) in (1, -1)
    assert not np.any(wavy_band.contains(0.5 * midline))


def test__exhaustion__small_loops_do_not_separate(wavy, wavy_band):
    index = wavy.smooth_index
    loop = band_loop(wavy_band, index)
    gamma = boundary_curve(wavy, 0.3, 2.5, band=wavy_band)

    assert nonseparating_check(cone_fill(loop), wavy_band)
    assert not nonseparating_check(cone_fill(gamma), wavy_band)


def test__exhaustion__nonseparating_check_rejects_loops_outside_the_band(wavy_band):
    with pytest.raises(InvalidParameterError):
        nonseparating_check(flat_disk(1.0, rings=3), wavy_band)


def test__exhaustion__core_hausdorff(circle):
    disk = flat_disk(2.0, rings=8)
    lifted = disk.with_vertices(disk.vertices + [0.0, 0.0, 0.05])

    assert core_hausdorff(disk, disk, 1.0) == 0.0
    # the lift is 0.05 in Euclidean terms, scaled by the conformal factor 2/(1 - |x|^2)
    assert 0.1 < core_hausdorff(disk, lifted, 1.0) < 0.15
    assert core_hausdorff(disk, lifted, 1e-6) == math.inf


def test__exhaustion__flat_stages_for_a_round_circle(circle):
    seen = []

    stages = run_exhaustion(circle, 0.0, [1.0, 1.5], 0.5, _solver_config(), on_stage=seen.append)

    assert [stage.n for stage in stages] == [1, 2]
    assert len(seen) == len(stages)
    assert all(a is b for a, b in zip(seen, stages, strict=True))
    assert all(stage.ok for stage in stages)
    assert stages[0].hausdorff_to_prev_on_core is None
    assert stages[1].hausdorff_to_prev_on_core < 1e-6
    assert stages[1].containment < 1e-6
    assert stages[1].core_components == 1
    assert stages[1].core_area == pytest.approx(4.0 * math.pi * math.sinh(0.25) ** 2, rel=0.25)
    assert stages[1].core_area < stages[1].core_area_bound
    assert stages[1].disk.vertex_count > stages[0].disk.vertex_count
    diagnostics = stages[1].diagnostics()
    assert diagnostics['r'] == 1.5
    assert diagnostics['error'] is None


def test__exhaustion__records_the_failing_stage(circle, monkeypatch):
    def fail(*args, **kwargs):
        raise SolverError('line search broke down')

    monkeypatch.setattr(exhaustion, 'minimize_disk', fail)

    stages = run_exhaustion(circle, 0.0, [1.0, 1.5], 0.5, _solver_config())

    assert len(stages) == 1
    assert not stages[0].ok
    assert stages[0].error == 'SolverError: line search broke down'
    assert stages[0].diagnostics()['energy'] is None


@pytest.mark.parametrize(
    ('radii', 'core'),
    [([], 0.5), ([2.0, 1.0], 0.5), ([1.0, 2.0], 1.0), ([1.0, 2.0], 0.0)],
)
def test__exhaustion__rejects_bad_schedules(circle, radii, core):
    with pytest.raises(InvalidParameterError):
        run_exhaustion(circle, 0.0, radii, core, _solver_config())


def test__exhaustion__tau_circles_flank_the_smooth_point(wavy):
    plus, minus = tau_circles(wavy, offset=0.05, angular_radius=0.6)
    point = wavy.smooth_point()

    for circle in (plus, minus):
        assert circle.angular_radius == pytest.approx(0.6)
        assert math.acos(float(circle.axis_array @ point)) == pytest.approx(0.65, abs=1e-9)
    normal = wavy.normal_at(wavy.smooth_index)
    assert plus.axis_array @ normal > 0.0 > minus.axis_array @ normal


def test__exhaustion__trace_circle_lies_on_the_geodesic_plane():
    circle = RoundCircle.from_axis([1.0, 0.0, 0.0], 0.6)

    trace = trace_circle(circle, 3.0, segments=32)

    np.testing.assert_allclose(np.linalg.norm(trace, axis=1), math.tanh(1.5), rtol=1e-12)
    np.testing.assert_allclose(geodesic_plane_distance(trace, circle), 0.0, atol=1e-9)
    with pytest.raises(RadiusTooSmallError):
        trace_circle(circle, 0.1, segments=32)


def test__exhaustion__coaxial_frame_centres_the_barrier_circles(wavy):
    plus, minus = tau_circles(wavy)

    frame = coaxial_frame(plus, minus)
    upper = frame.forward(plus.sample(32))
    lower = frame.forward(minus.sample(32))

    assert np.std(upper[:, 2]) < 1e-6
    assert np.std(lower[:, 2]) < 1e-6
    assert upper[:, 2].mean() == pytest.approx(-lower[:, 2].mean(), abs=1e-6)
    np.testing.assert_allclose(frame.backward(upper), plus.sample(32), atol=1e-9)


def test__exhaustion__barrier_annulus_starts_on_the_traces(wavy):
    plus, minus = tau_circles(wavy)

    first, second, tube = barrier_annulus_init(plus, minus, 3.0, segments=32, rows=8)

    assert tube.topology == Topology.ANNULUS
    radius = math.tanh(1.5)
    np.testing.assert_allclose(np.linalg.norm(first, axis=1), radius, rtol=1e-9)
    np.testing.assert_allclose(geodesic_plane_distance(second, minus), 0.0, atol=1e-6)


def test__exhaustion__probe_of_a_round_circle_hull_is_degenerate(circle):
    hull = supporting_halfspaces(circle, 0.0)

    assert probe_length(hull, [0.0, 0.0, 1.0]) < 1e-6


def test__exhaustion__barrier_profile_helpers():
    plus = RoundCircle.from_axis([1.0, 0.0, 0.3], 0.5)
    minus = RoundCircle.from_axis([1.0, 0.0, -0.3], 0.5)
    profile = BarrierProfile(
        tau_plus=plus,
        tau_minus=minus,
        radii=[2.0, 3.0, 4.0],
        distances=[0.4, 1.1, 1.9],
        probe_length=1.0,
    )

    assert profile.is_monotone
    assert profile.F(3.0) == 1.1
    assert profile.rows()[0] == {'r': 2.0, 'F': 0.4, 'probe_length': 1.0}
    with pytest.raises(InvalidParameterError):
        profile.F(2.5)
    dipping = profile.model_copy(update={'distances': [0.4, 0.3, 1.9]})
    assert not dipping.is_monotone
