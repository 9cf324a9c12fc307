import math

import numpy as np
import pytest

from hplanes.hyperbolic import BallPoint, InvalidParameterError
from hplanes.mesh.energy import (
    EnergyEvaluator,
    area_gradient,
    enclosed_volume,
    energy_ih,
    gradient_ih,
    hyperbolic_area,
    vertex_mean_curvature,
)
from hplanes.mesh.generators import flat_disk, icosphere
from hplanes.mesh.model import MeshInvariantError, Topology, TriMesh
from hplanes.mesh.quadrature import (
    MAX_LEVEL,
    ORDERS,
    SERIES_CUTOFF,
    base_rule,
    composite_rule,
    radial_kernel,
    radial_kernel_slope,
    refinement_levels,
)


@pytest.fixture(scope='module')
def jittered_disk() -> TriMesh:
    mesh = flat_disk(1.0, rings=5)
    rng = np.random.default_rng(7)
    vertices = mesh.vertices.copy()
    interior = mesh.interior_indices
    vertices[interior] += rng.normal(scale=0.01, size=(len(interior), 3))
    return mesh.with_vertices(vertices)


@pytest.mark.parametrize('order', ORDERS)
def test__quadrature__weights_sum_to_one(order):
    points, weights = base_rule(order)
    fine_points, fine_weights = composite_rule(order, 2)

    assert weights.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(points.sum(axis=1), 1.0, atol=1e-12)
    assert len(fine_weights) == 16 * len(weights)
    assert fine_weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert not fine_points.flags.writeable


def test__quadrature__second_order_rule_is_exact_for_quadratics():
    points, weights = base_rule(2)

    # mean of a squared barycentric coordinate over a triangle
    assert (points[:, 0] ** 2) @ weights == pytest.approx(1.0 / 6.0, abs=1e-12)
    assert (points[:, 0] * points[:, 1]) @ weights == pytest.approx(1.0 / 12.0, abs=1e-12)


def test__quadrature__rejects_unknown_order():
    with pytest.raises(ValueError):
        base_rule(3)


def test__quadrature__radial_kernel_has_divergence_lambda_cubed():
    q = np.array([0.0, 0.01, 0.1, SERIES_CUTOFF - 1e-9, SERIES_CUTOFF, 0.5, 0.9])

    divergence = 3.0 * radial_kernel(q) + q * q * radial_kernel_slope(q)

    np.testing.assert_allclose(divergence, 8.0 / (1.0 - q * q) ** 3, rtol=1e-9)
    assert radial_kernel(np.array([0.0]))[0] == pytest.approx(8.0 / 3.0)


def test__quadrature__kernel_is_continuous_at_the_series_cutoff():
    below = radial_kernel(np.array([SERIES_CUTOFF - 1e-12]))[0]
    above = radial_kernel(np.array([SERIES_CUTOFF]))[0]

    assert below == pytest.approx(above, rel=1e-9)


def test__quadrature__refinement_grows_toward_the_ideal_sphere():
    small = np.array([[[0.0, 0.0, 0.0], [0.01, 0.0, 0.0], [0.0, 0.01, 0.0]]])
    rim = np.array([[[0.996, 0.0, 0.0], [0.99, 0.05, 0.0], [0.99, 0.0, 0.05]]])

    assert refinement_levels(small).tolist() == [0]
    assert refinement_levels(rim).tolist() == [MAX_LEVEL]


def test__energy__flat_disk_area_matches_closed_form():
    r = 1.0
    mesh = flat_disk(r, rings=16)

    assert hyperbolic_area(mesh) == pytest.approx(4.0 * math.pi * math.sinh(r / 2.0) ** 2, rel=5e-3)
    assert enclosed_volume(mesh) == pytest.approx(0.0, abs=1e-12)


def test__energy__sphere_volume_matches_closed_form():
    r = 0.8
    sphere = icosphere(r, subdivisions=4)

    volume = enclosed_volume(sphere)

    assert volume == pytest.approx(math.pi * (math.sinh(2.0 * r) - 2.0 * r), rel=1e-2)
    assert enclosed_volume(sphere.flipped()) == pytest.approx(-volume, rel=1e-12)
    assert hyperbolic_area(sphere) == pytest.approx(4.0 * math.pi * math.sinh(r) ** 2, rel=1e-2)


def test__energy__report_combines_area_and_volume():
    sphere = icosphere(0.6, subdivisions=2)

    report = energy_ih(sphere, -0.5)

    assert report.energy == report.area + 2.0 * report.H * report.volume
    assert report.quadrature_error >= 0.0
    assert len(report.triangle_errors) == sphere.triangle_count
    assert 'triangle_errors' not in report.model_dump()


@pytest.mark.parametrize('H', [1.0, -1.0, 2.0])
def test__energy__rejects_mean_curvature_outside_interval(H):
    with pytest.raises(InvalidParameterError):
        EnergyEvaluator(np.array([[0, 1, 2]]), H)


def test__energy__rejects_reference_outside_the_ball():
    with pytest.raises(InvalidParameterError):
        EnergyEvaluator(np.array([[0, 1, 2]]), 0.0, reference=np.array([0.0, 0.0, 1.5]))


def test__energy__rejects_degenerate_triangles():
    vertices = np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.2, 0.0, 0.0]])
    mesh = TriMesh.model_construct(
        vertices=vertices,
        triangles=np.array([[0, 1, 2]]),
        boundary_loops=(),
        topology=Topology.DISK,
    )

    with pytest.raises(MeshInvariantError, match='degenerate'):
        hyperbolic_area(mesh)


@pytest.mark.parametrize(
    ('H', 'reference'),
    [(0.0, None), (0.4, None), (-0.3, BallPoint(x=0.1, y=-0.2, z=0.3))],
)
def test__energy__gradient_matches_finite_differences(jittered_disk, H, reference):
    kwargs = {} if reference is None else {'reference': reference}
    evaluator = EnergyEvaluator(jittered_disk.triangles, H, **kwargs)
    vertices = jittered_disk.vertices
    _, gradient = evaluator(vertices)
    step = 1e-6

    for vertex in jittered_disk.interior_indices[::7]:
        for axis in range(3):
            plus = vertices.copy()
            minus = vertices.copy()
            plus[vertex, axis] += step
            minus[vertex, axis] -= step
            numeric = (evaluator.energy(plus) - evaluator.energy(minus)) / (2.0 * step)
            assert gradient[vertex, axis] == pytest.approx(numeric, rel=1e-5, abs=1e-7)


def test__energy__flat_disk_is_critical_for_area():
    mesh = flat_disk(1.0, rings=6)

    gradient = area_gradient(mesh)

    np.testing.assert_allclose(gradient[mesh.interior_indices, 2], 0.0, atol=1e-12)
    np.testing.assert_allclose(
        gradient_ih(mesh, 0.0)[mesh.interior_indices], gradient[mesh.interior_indices], atol=1e-12
    )


def test__energy__sphere_mean_curvature_is_minus_coth():
    r = 1.0
    sphere = icosphere(r, subdivisions=4)

    curvature = vertex_mean_curvature(sphere)
    relative = np.abs(curvature + 1.0 / math.tanh(r)) * math.tanh(r)

    assert not np.any(np.isnan(curvature))
    assert float(np.median(relative)) < 0.02
    flipped = vertex_mean_curvature(sphere.flipped())
    assert float(np.median(flipped)) == pytest.approx(1.0 / math.tanh(r), rel=0.02)


def test__energy__mean_curvature_is_undefined_on_the_boundary():
    mesh = flat_disk(1.0, rings=4)

    curvature = vertex_mean_curvature(mesh)

    assert np.all(np.isnan(curvature[mesh.fixed_mask]))
