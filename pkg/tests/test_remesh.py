import numpy as np
import pytest

from hplanes.hyperbolic import InvalidParameterError, distance
from hplanes.mesh.generators import flat_disk
from hplanes.mesh.model import Topology
from hplanes.mesh.remesh import RemeshingError, refine_and_improve


def test__remesh__refines_toward_target_length():
    mesh = flat_disk(1.0, rings=3)
    boundary = mesh.vertices[mesh.boundary_loops[0]]

    refined = refine_and_improve(mesh, target_edge_length=0.12)

    refined.check_invariants()
    assert refined.topology == Topology.DISK
    assert refined.vertex_count > mesh.vertex_count
    new_boundary = refined.vertices[refined.boundary_loops[0]]
    for point in boundary:
        assert np.min(np.linalg.norm(new_boundary - point, axis=1)) == 0.0

    edges = refined.edges()
    lengths = distance(refined.vertices[edges[:, 0]], refined.vertices[edges[:, 1]])
    assert np.median(lengths) < 0.2


def test__remesh__without_target_keeps_boundary_indices():
    mesh = flat_disk(1.0, rings=4)

    improved = refine_and_improve(mesh, target_edge_length=None, rounds=1)

    assert improved.vertex_count == mesh.vertex_count
    np.testing.assert_array_equal(improved.boundary_loops[0], mesh.boundary_loops[0])
    np.testing.assert_array_equal(
        improved.vertices[improved.fixed_mask], mesh.vertices[mesh.fixed_mask]
    )


@pytest.mark.parametrize('target', [0.0, -0.1])
def test__remesh__rejects_non_positive_target(target):
    with pytest.raises(InvalidParameterError):
        refine_and_improve(flat_disk(1.0, rings=3), target_edge_length=target)


def test__remesh__error_carries_diagnostics():
    error = RemeshingError('failed', {'splits': 2})

    assert isinstance(error, RuntimeError)
    assert error.diagnostics == {'splits': 2}
    assert RemeshingError('failed').diagnostics == {}
