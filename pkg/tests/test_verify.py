import math

import numpy as np
import pytest

from hplanes.curves import circle_curve
from hplanes.hyperbolic import InvalidParameterError
from hplanes.mesh.generators import cone_fill, flat_disk
from hplanes.mesh.model import Topology, TriMesh
from hplanes.solver import SolverConfig
from hplanes import verify
from hplanes.umbilic import cap_mesh, round_curve_cap
from hplanes.verify import (
    CheckReport,
    barrier_family,
    check_containment,
    check_embedded,
    check_maximum_principle,
    contact_curvature,
    discrete_mean_curvature,
    foliation_sweep,
    graph_near_infinity,
    mirror_symmetry,
    pair_planes,
)

NORTH = np.array([0.0, 0.0, 1.0])


@pytest.fixture(scope='module')
def caps(equator):
    return {H: cap_mesh(round_curve_cap(equator, H), 2.0, rings=16) for H in (-0.3, 0.0, 0.3)}


@pytest.fixture
def bulge():
    boundary = math.tanh(1.0) * circle_curve(n=48).points
    return cone_fill(boundary, apex=[0.0, 0.0, 0.3])


def test__verify__report_verdict_follows_the_tolerance():
    report = CheckReport.measure('demo', 0.2, 0.1, location=np.zeros(3), note='x')

    assert not report.passed
    assert report.verdict == 'fail'
    assert report.location == [0.0, 0.0, 0.0]
    with pytest.raises(ValueError, match='contradicts'):
        CheckReport(name='demo', passed=True, violation=1.0, tolerance=0.5)


def test__verify__cap_lies_in_the_shifted_hull(equator, caps):
    report = check_containment(caps[0.3], equator, 0.3, sample_count=16)

    assert report.passed
    assert report.provenance['halfspaces'] == '16'


def test__verify__plane_leaves_the_shifted_hull(equator):
    report = check_containment(flat_disk(2.0, rings=8), equator, 0.3, sample_count=16)

    assert not report.passed
    # the origin sits atanh(H) away from the cap
    assert report.violation >= 0.3


def test__verify__cap_reports_its_mean_curvature(caps):
    curvature = discrete_mean_curvature(caps[0.3])

    assert float(np.nanmedian(curvature)) == pytest.approx(0.3, abs=0.03)


def test__verify__barrier_family(equator):
    family = barrier_family(equator, NORTH, 0.0, steps=12)

    assert len(family) == 12
    assert all(halfspace.side == -1 for halfspace in family)
    assert family[0].cap.circle.angular_radius < family[-1].cap.circle.angular_radius
    with pytest.raises(InvalidParameterError):
        barrier_family(equator, [1.0, 0.0, 0.0], 0.0)


def test__verify__maximum_principle_holds_for_a_plane(equator):
    family = barrier_family(equator, NORTH, 0.0)

    report = check_maximum_principle(flat_disk(2.0, rings=8), family)

    assert report.passed
    assert report.violation == 0.0


def test__verify__maximum_principle_catches_a_bulge(equator, bulge):
    family = barrier_family(equator, NORTH, 0.0)

    report = check_maximum_principle(bulge, family)

    assert not report.passed
    assert report.violation > 0.1
    with pytest.raises(InvalidParameterError):
        check_maximum_principle(bulge, [])


def _up_to_first_contact(mesh, family, tol):
    depths = [float(np.max(halfspace.violation(mesh.vertices))) for halfspace in family]
    first = next(step for step, depth in enumerate(depths) if depth >= -tol)
    return family[: first + 1]


def test__verify__cap_curvature_matches_its_mesh(equator, caps):
    cap = round_curve_cap(equator, 0.3)
    mesh = caps[0.3]
    apex = int(np.argmin(np.linalg.norm(mesh.vertices - cap.apex, axis=1)))

    for normal in (NORTH, -NORTH):
        expected = cap.curvature_toward(mesh.vertices[apex], normal)
        assert abs(expected) == pytest.approx(0.3)
        assert contact_curvature(mesh, apex, normal) == pytest.approx(expected, abs=0.05)


def test__verify__maximum_principle_accepts_a_convex_interior_contact(equator, bulge):
    family = _up_to_first_contact(bulge, barrier_family(equator, NORTH, 0.0), 0.1)

    report = check_maximum_principle(bulge, family, tol=0.1)

    assert report.passed
    assert report.note.startswith('first contact at interior vertex')
    assert report.measurements['barrier_curvature'] == 0.0
    assert report.measurements['mesh_curvature'] > 0.0


def test__verify__maximum_principle_rejects_inverted_curvature(equator, bulge, monkeypatch):
    family = _up_to_first_contact(bulge, barrier_family(equator, NORTH, 0.0), 0.1)
    monkeypatch.setattr(verify, 'contact_curvature', lambda mesh, vertex, normal: -0.5)

    report = check_maximum_principle(bulge, family, tol=0.1)

    assert report.passed is False
    assert report.measurements['crossing_depth'] == 0.0
    assert report.violation == pytest.approx(0.5 - verify.CURVATURE_TOLERANCE)


def test__verify__pair_of_caps_is_disjoint(equator, caps):
    _, _, report = pair_planes(equator, 0.3, SolverConfig(), surfaces=(caps[0.3], caps[-0.3]))

    assert report.passed
    assert report.measurements['min_distance'] == pytest.approx(2.0 * math.atanh(0.3), rel=0.02)
    assert report.measurements['equidistant_oracle'] == pytest.approx(2.0 * math.atanh(0.3))


def test__verify__pair_planes_needs_positive_mean_curvature(equator):
    with pytest.raises(InvalidParameterError):
        pair_planes(equator, 0.0, SolverConfig())


def test__verify__caps_foliate(equator, caps):
    report = foliation_sweep(
        equator, [0.3, -0.3, 0.0], SolverConfig(), surfaces=caps, sample_radius=1.5
    )

    assert report.passed
    assert report.measurements['gap_0'] == pytest.approx(math.atanh(0.3), rel=0.02)
    assert report.provenance['H'] == '-0.3,0.0,0.3'


def test__verify__foliation_edge_cases(equator):
    single = foliation_sweep(equator, [0.2], SolverConfig())

    assert single.passed
    assert single.note.startswith('vacuous')
    with pytest.raises(InvalidParameterError):
        foliation_sweep(equator, [0.0, 1.0], SolverConfig())


def test__verify__plane_is_a_graph_near_infinity(equator):
    report = graph_near_infinity(flat_disk(3.0, rings=24), equator)

    assert report.passed
    assert report.measurements['arclength_coverage'] == 1.0
    assert report.measurements['folded_triangles'] == 0.0


def test__verify__embedded_detects_crossing_triangles():
    vertices = np.array(
        [
            [-0.3, -0.3, 0.0],
            [0.3, -0.3, 0.0],
            [0.0, 0.3, 0.0],
            [0.0, -0.1, -0.2],
            [0.0, -0.1, 0.2],
            [0.0, 0.2, 0.0],
        ]
    )
    crossing = TriMesh.model_construct(
        vertices=vertices,
        triangles=np.array([[0, 1, 2], [3, 4, 5]]),
        boundary_loops=(),
        topology=Topology.DISK,
    )

    assert check_embedded(flat_disk(1.0, rings=4)).passed
    report = check_embedded(crossing)
    assert not report.passed
    assert report.violation >= 1.0


def test__verify__mirror_symmetry():
    boundary = math.tanh(1.0) * circle_curve(n=48).points
    up = cone_fill(boundary, apex=[0.0, 0.0, 0.2])
    down = cone_fill(boundary, apex=[0.0, 0.0, -0.2])
    shallow = cone_fill(boundary, apex=[0.0, 0.0, -0.1])

    assert mirror_symmetry(up, down, NORTH).passed
    skewed = mirror_symmetry(up, shallow, NORTH)
    assert not skewed.passed
    assert skewed.note == 'vertexwise'


def test__verify__mirror_symmetry_across_resolutions(equator):
    plus = cap_mesh(round_curve_cap(equator, 0.3), 2.0, rings=8)
    minus = cap_mesh(round_curve_cap(equator, -0.3), 2.0, rings=9)

    report = mirror_symmetry(plus, minus, NORTH, tol=0.02)

    assert report.passed
    assert report.note == 'hausdorff'
