import math

import numpy as np
import pytest

from hplanes.mesh.gulliver import (
    cell_weights,
    free_nodes,
    gulliver_energy,
    gulliver_gradient,
    hemisphere_map,
    identity_map,
)
from hplanes.mesh.model import ParamGrid, param_grid_from_function


def test__gulliver__cell_weights_cover_the_unit_disk():
    weights = cell_weights(33)

    assert weights.shape == (32, 32)
    assert weights.sum() == pytest.approx(math.pi, rel=1e-12)
    assert weights.min() >= 0.0
    assert weights[16, 16] == pytest.approx((2.0 / 32) ** 2)


@pytest.mark.parametrize('H', [0.0, 0.5, -0.7])
def test__gulliver__identity_map_energy_is_two_pi(H):
    grid = param_grid_from_function(identity_map, 33)

    assert gulliver_energy(grid, H) == pytest.approx(2.0 * math.pi, rel=1e-12)


def test__gulliver__gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    base = param_grid_from_function(identity_map, 17).values
    values = base + rng.normal(scale=0.05, size=base.shape)
    H = 0.6
    gradient = gulliver_gradient(ParamGrid(values=values), H)
    step = 1e-5

    for i, j, k in [(8, 8, 2), (3, 12, 0), (0, 0, 1), (16, 5, 2), (10, 2, 1)]:
        plus = values.copy()
        minus = values.copy()
        plus[i, j, k] += step
        minus[i, j, k] -= step
        numeric = (
            gulliver_energy(ParamGrid(values=plus), H) - gulliver_energy(ParamGrid(values=minus), H)
        ) / (2.0 * step)
        assert gradient[i, j, k] == pytest.approx(numeric, rel=1e-6, abs=1e-9)


def test__gulliver__hemisphere_is_critical_at_minus_one():
    grid = param_grid_from_function(hemisphere_map, 65)
    interior = free_nodes(grid)

    critical = np.abs(gulliver_gradient(grid, -1.0)[interior]).max()
    generic = np.abs(gulliver_gradient(grid, 0.0)[interior]).max()

    assert critical < 0.1 * generic


def test__gulliver__free_nodes_stay_inside_the_disk():
    grid = param_grid_from_function(identity_map, 33)

    mask = free_nodes(grid)

    assert mask[16, 16]
    assert not mask[0, 0]
    assert not mask[0, 16]
    x, y = np.meshgrid(grid.coordinates, grid.coordinates, indexing='ij')
    assert np.all(x[mask] ** 2 + y[mask] ** 2 < 1.0)
