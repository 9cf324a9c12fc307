"""Gulliver's parametric energy ``F_H`` on a square grid, flat Euclidean target.

``F_H(u) = ∫ |u_x|² + |u_y|² + (4/3) H u · (u_x × u_y)`` over the unit disk,
discretized with cell-centred differences and the exact area of every grid
cell inside the disk. Critical points are surfaces of constant mean curvature
``-H`` with respect to the normal ``u_x × u_y``; the conformal unit hemisphere
is critical at ``H = -1``.
"""

import numpy as np

from hplanes.mesh.model import ParamGrid


def _primitive(s: np.ndarray) -> np.ndarray:
    """``∫_0^s √(1 - x²) dx``."""
    return 0.5 * (s * np.sqrt(1.0 - s * s) + np.arcsin(s))


def _quadrant_area(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Area of the unit disk inside ``[0, x] x [0, y]`` for ``x, y >= 0``."""
    x = np.minimum(x, 1.0)
    y = np.minimum(y, 1.0)
    knee = np.sqrt(np.maximum(1.0 - y * y, 0.0))
    clipped = knee * y + _primitive(x) - _primitive(np.minimum(knee, x))
    return np.where(x * x + y * y <= 1.0, x * y, clipped)


def _corner_area(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.sign(y) * _quadrant_area(np.abs(x), np.abs(y))


def cell_weights(size: int) -> np.ndarray:
    """Exact area of each grid cell intersected with the unit disk, shape ``(M-1, M-1)``."""
    axis = np.linspace(-1.0, 1.0, size)
    x0, y0 = np.meshgrid(axis[:-1], axis[:-1], indexing='ij')
    x1, y1 = np.meshgrid(axis[1:], axis[1:], indexing='ij')
    outer = _corner_area(x1, y1) + _corner_area(x0, y0)
    return outer - _corner_area(x0, y1) - _corner_area(x1, y0)


def _differences(values: np.ndarray, spacing: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = values[:-1, :-1]
    b = values[1:, :-1]
    c = values[:-1, 1:]
    d = values[1:, 1:]
    du_dx = (b + d - a - c) / (2.0 * spacing)
    du_dy = (c + d - a - b) / (2.0 * spacing)
    mean = 0.25 * (a + b + c + d)
    return du_dx, du_dy, mean


def gulliver_energy(grid: ParamGrid, H: float) -> float:
    weights = cell_weights(grid.size)
    du_dx, du_dy, mean = _differences(grid.values, grid.spacing)
    dirichlet = np.sum(du_dx * du_dx, axis=-1) + np.sum(du_dy * du_dy, axis=-1)
    enclosed = np.einsum('ijk,ijk->ij', mean, np.cross(du_dx, du_dy))
    return float(np.sum(weights * (dirichlet + (4.0 / 3.0) * H * enclosed)))


def gulliver_gradient(grid: ParamGrid, H: float) -> np.ndarray:
    """Exact gradient of :func:`gulliver_energy` with respect to every grid value."""
    weights = cell_weights(grid.size)[..., None]
    h = grid.spacing
    du_dx, du_dy, mean = _differences(grid.values, h)
    coupling = (4.0 / 3.0) * H
    by_dx = weights * (2.0 * du_dx + coupling * np.cross(du_dy, mean))
    by_dy = weights * (2.0 * du_dy + coupling * np.cross(mean, du_dx))
    by_mean = weights * coupling * np.cross(du_dx, du_dy)

    gradient = np.zeros_like(grid.values)
    # corner offsets (di, dj) with their dx and dy difference signs
    for di, dj, sx, sy in ((0, 0, -1, -1), (1, 0, 1, -1), (0, 1, -1, 1), (1, 1, 1, 1)):
        rows = slice(di, grid.size - 1 + di)
        cols = slice(dj, grid.size - 1 + dj)
        gradient[rows, cols] += (sx * by_dx + sy * by_dy) / (2.0 * h) + 0.25 * by_mean
    return gradient


def free_nodes(grid: ParamGrid) -> np.ndarray:
    """Nodes whose four surrounding cells lie entirely inside the disk."""
    weights = cell_weights(grid.size)
    full = np.isclose(weights, grid.spacing**2, rtol=1e-12, atol=0.0)
    mask = np.zeros((grid.size, grid.size), dtype=bool)
    mask[1:-1, 1:-1] = full[:-1, :-1] & full[1:, :-1] & full[:-1, 1:] & full[1:, 1:]
    return mask


def hemisphere_map(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Conformal map of the unit disk onto the upper unit hemisphere."""
    squared = x * x + y * y
    scale = 1.0 / (1.0 + squared)
    return np.stack([2.0 * x * scale, 2.0 * y * scale, (1.0 - squared) * scale], axis=-1)


def identity_map(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.stack([x, y, np.zeros_like(x)], axis=-1)
