"""Triangle quadrature rules and the radial kernel of the enclosed-volume integral."""

import functools
import math

import numpy as np

SERIES_CUTOFF = 0.2
_SERIES_TERMS = 20
MAX_LEVEL = 4


def _symmetric(weight: float, a: float, b: float) -> list[tuple[float, tuple[float, float, float]]]:
    return [(weight, (a, b, b)), (weight, (b, a, b)), (weight, (b, b, a))]


_RULES: dict[int, list[tuple[float, tuple[float, float, float]]]] = {
    1: [(1.0, (1 / 3, 1 / 3, 1 / 3))],
    2: _symmetric(1 / 3, 2 / 3, 1 / 6),
    4: _symmetric(0.223381589678011, 0.108103018168070, 0.445948490915965)
    + _symmetric(0.109951743655322, 0.816847572980459, 0.091576213509771),
    5: [(0.225, (1 / 3, 1 / 3, 1 / 3))]
    + _symmetric(0.132394152788506, 0.059715871789770, 0.470142064105115)
    + _symmetric(0.125939180544827, 0.797426985353087, 0.101286507323456),
}

ORDERS = tuple(sorted(_RULES))


def base_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points ``(k, 3)`` and weights ``(k,)`` summing to 1."""
    if order not in _RULES:
        raise ValueError(f'Unsupported quadrature order {order}, expected one of {ORDERS}')
    weights = np.array([weight for weight, _ in _RULES[order]])
    points = np.array([point for _, point in _RULES[order]])
    return points, weights


@functools.cache
def composite_rule(order: int, level: int) -> tuple[np.ndarray, np.ndarray]:
    """Base rule applied on the ``4**level`` triangles of repeated midpoint subdivision."""
    points, weights = base_rule(order)
    cells = [np.eye(3)]
    for _ in range(level):
        refined = []
        for corners in cells:
            a, b, c = corners
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            refined.extend(
                [np.array(x) for x in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]
            )
        cells = refined
    all_points = np.concatenate([points @ corners for corners in cells])
    all_weights = np.tile(weights, len(cells)) / len(cells)
    all_points.setflags(write=False)
    all_weights.setflags(write=False)
    return all_points, all_weights


def refinement_levels(corners: np.ndarray) -> np.ndarray:
    """Subdivision level per triangle from the spread of the conformal factor over its corners."""
    squared = np.sum(corners * corners, axis=-1)
    factor = 2.0 / (1.0 - squared)
    ratio = np.max(factor, axis=1) / np.min(factor, axis=1)
    with np.errstate(divide='ignore', invalid='ignore'):
        steps = np.ceil(np.log2(np.log(np.maximum(ratio, 1.0)) / math.log(1.1)))
    levels = np.where(ratio > 1.1, np.clip(np.nan_to_num(steps, nan=1.0), 1, MAX_LEVEL), 0)
    levels = np.where(np.max(np.sqrt(squared), axis=1) > 0.995, MAX_LEVEL, levels)
    return levels.astype(np.int64)


def _series(q: np.ndarray, derivative: bool) -> np.ndarray:
    squared = q * q
    total = np.zeros_like(q)
    power = np.ones_like(q)
    first = 1 if derivative else 0
    for n in range(first, first + _SERIES_TERMS):
        coefficient = (n + 1) * (n + 2) / 2 / (2 * n + 3)
        total += (2 * n * coefficient if derivative else coefficient) * power
        power = power * squared
    return 8.0 * total


def radial_kernel(q: np.ndarray) -> np.ndarray:
    """``G(q)`` with ``x G(|x|)`` the radial field of divergence ``λ³``."""
    q = np.asarray(q, dtype=float)
    result = np.empty_like(q)
    small = q < SERIES_CUTOFF
    result[small] = _series(q[small], derivative=False)
    big = q[~small]
    squared = big * big
    integral = big * (1.0 + squared) / (1.0 - squared) ** 2 - np.arctanh(big)
    result[~small] = integral / big**3
    return result


def radial_kernel_slope(q: np.ndarray) -> np.ndarray:
    """``G'(q) / q``, finite at the origin."""
    q = np.asarray(q, dtype=float)
    result = np.empty_like(q)
    small = q < SERIES_CUTOFF
    result[small] = _series(q[small], derivative=True)
    big = q[~small]
    squared = big * big
    result[~small] = 8.0 / (squared * (1.0 - squared) ** 3) - 3.0 * radial_kernel(big) / squared
    return result
