import math

import numpy as np
import pytest

from hplanes import acceptance
from hplanes.acceptance import (
    PlaneCache,
    ac1_sphere_curvature,
    ac2_closed_forms,
    ac3_umbilic_recovery,
    ac4_convex_hull,
    ac9_numerical_hygiene,
    dented_mesh,
    folded_collar,
    perturbed_circle,
    run_acceptance,
)
from hplanes.config import SolverSection, parse_config
from hplanes.curves import circle_curve
from hplanes.exhaustion import ExhaustionStage
from hplanes.hyperbolic import geodesic_ball
from hplanes.mesh.generators import flat_disk
from hplanes.solver import SolverError
from hplanes.umbilic import cap_mesh, round_curve_cap
from hplanes.verify import barrier_family, check_maximum_principle, graph_near_infinity

NORTH = np.array([0.0, 0.0, 1.0])


def _failed_run(curve, H, radii, core_radius, cfg):
    return [
        ExhaustionStage(
            n=1,
            ball=geodesic_ball(radii[0]),
            gamma=np.zeros((0, 3)),
            ideal_gap=math.inf,
            core_area_bound=1.0,
            error='RadiusTooSmallError: band missed',
        )
    ]


def test__acceptance__sphere_curvature_report():
    (report,) = ac1_sphere_curvature(subdivisions=4, tol=0.05)

    assert report.name == 'ac1_sphere_curvature'
    assert report.passed
    assert report.runtime is not None
    assert report.measurements['coth_1'] == pytest.approx(1.0 / math.tanh(1.0))


def test__acceptance__closed_forms_report():
    reports = ac2_closed_forms(rings=(8, 16), subdivisions=4, tol=0.02)

    assert [report.name for report in reports] == [
        'ac2_disk_area',
        'ac2_ball_volume',
        'ac2_quadrature_order',
    ]
    assert reports[0].passed
    assert reports[1].passed
    assert 'area_order_0' in reports[2].measurements
    assert 'volume_order_0' in reports[2].measurements


def test__acceptance__plane_cache_runs_each_exhaustion_once(monkeypatch):
    calls = []

    def fake_run(curve, H, radii, core_radius, cfg):
        calls.append((curve.name, H, cfg.ball.hyperbolic_radius))
        return _failed_run(curve, H, radii, core_radius, cfg)

    monkeypatch.setattr(acceptance, 'run_exhaustion', fake_run)
    planes = PlaneCache(SolverSection(), (1.0, 1.5), 0.5)
    curve = circle_curve(n=64)

    first = planes.stages(curve, 0.3)
    second = planes.stages(curve, 0.3)
    planes.stages(curve, -0.3)

    assert first is second
    assert calls == [('circle', 0.3, 1.0), ('circle', -0.3, 1.0)]
    with pytest.raises(SolverError, match='band missed'):
        planes.disk(curve, 0.3)


def test__acceptance__failed_exhaustion_fails_the_criterion(monkeypatch):
    monkeypatch.setattr(acceptance, 'run_exhaustion', _failed_run)
    planes = PlaneCache(SolverSection(), (1.0, 1.5), 0.5)

    (report,) = ac4_convex_hull(planes, circle_curve(n=64))

    assert report.name == 'ac4_containment'
    assert not report.passed
    assert report.violation == math.inf


def test__acceptance__umbilic_recovery_of_the_flat_plane(tmp_path):
    planes = PlaneCache(SolverSection(max_iterations=40), (1.0, 1.5), 0.5)

    reports = ac3_umbilic_recovery(planes, H_values=(0.0,), sample_count=64, out=tmp_path)

    assert [report.name for report in reports] == [
        'ac3_umbilic_H+0.00',
        'ac3_umbilic_H+0.00_monotone',
        'ac3_umbilic_H+0.00_core',
    ]
    assert all(report.passed for report in reports)
    assert (tmp_path / 'ac3_umbilic_H+0.00_stages.csv').exists()
    assert (tmp_path / 'ac3_umbilic_H+0.00.obj').exists()


def test__acceptance__dented_disk_breaks_the_maximum_principle():
    disk = flat_disk(2.0, rings=8)
    dented = dented_mesh(disk, NORTH)
    family = barrier_family(circle_curve(n=64), NORTH, 0.0)

    centre = int(np.argmin(np.linalg.norm(disk.vertices, axis=1)))
    assert dented.vertices[centre, 2] == pytest.approx(0.85)
    np.testing.assert_array_equal(dented.vertices[disk.fixed_mask], disk.vertices[disk.fixed_mask])
    assert check_maximum_principle(disk, family).passed
    assert not check_maximum_principle(dented, family).passed


def test__acceptance__folded_collar_is_not_a_graph():
    circle = circle_curve(n=256)
    cap = cap_mesh(round_curve_cap(circle, 0.0), 3.0, rings=48)

    report = graph_near_infinity(folded_collar(cap, circle), circle)

    assert not report.passed
    assert math.isfinite(report.violation)
    assert report.measurements['folded_triangles'] > 0.0


def test__acceptance__perturbed_circle_is_normalized():
    curve = perturbed_circle(128)

    assert len(curve) == 128
    np.testing.assert_allclose(curve.axis(), NORTH, atol=1e-6)


def test__acceptance__numerical_hygiene(tmp_path):
    reports = {
        report.name: report
        for report in ac9_numerical_hygiene(
            SolverSection(), tmp_path, vertex_samples=5, grid_size=17
        )
    }

    assert set(reports) == {
        'ac9_gradient_flat_disk',
        'ac9_gradient_cap',
        'ac9_gradient_sphere',
        'ac9_gulliver_identity',
        'ac9_rerun_identical',
    }
    assert reports['ac9_gulliver_identity'].passed
    assert reports['ac9_rerun_identical'].passed
    assert all(reports[f'ac9_gradient_{name}'].violation < 1e-5 for name in ('flat_disk', 'cap'))


@pytest.mark.slow
def test__acceptance__full_suite_passes(tmp_path):
    reports = run_acceptance(parse_config('command: accept\n'), tmp_path)

    failed = [report.name for report in reports if not report.passed]
    assert failed == []
    assert (tmp_path / 'ac7_barrier_profile.csv').exists()


def test__acceptance__closed_forms_measure_the_volume_order():
    (_, _, order) = ac2_closed_forms(rings=(8, 16), subdivisions=4, tol=0.02)

    assert order.measurements['volume_order_0'] > 1.5
    assert order.violation == pytest.approx(
        max(0.0, 1.8 - min(order.measurements.values()))
    )


def test__acceptance__closed_forms_fail_on_a_slow_volume_order(monkeypatch):
    exact = math.pi * (math.sinh(2.0) - 2.0)
    errors = iter([0.1, 0.09])
    monkeypatch.setattr(acceptance, 'enclosed_volume', lambda mesh: exact + next(errors))

    (_, volume, order) = ac2_closed_forms(rings=(8, 16), subdivisions=4, tol=0.02)

    assert volume.measurements['volume'] == pytest.approx(exact + 0.09)
    assert order.measurements['volume_order_0'] == pytest.approx(math.log2(0.1 / 0.09))
    assert not order.passed
