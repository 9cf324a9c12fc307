"""Nearest points on a triangle mesh for batches of query points."""

import typing as t

import numpy as np
import numpy.typing as npt
from scipy.spatial import cKDTree

from hplanes.hyperbolic import distance
from hplanes.mesh.model import TriMesh


class ClosestPoints(t.NamedTuple):
    points: np.ndarray
    triangles: np.ndarray
    euclidean: np.ndarray
    hyperbolic: np.ndarray


def closest_on_triangles(
    queries: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray
) -> np.ndarray:
    """Closest point of triangle ``(a, b, c)`` to each query; inputs broadcast to ``(..., 3)``."""

    def dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.sum(u * v, axis=-1)

    ab, ac = b - a, c - a
    ap, bp, cp = queries - a, queries - b, queries - c
    d1, d2 = dot(ab, ap), dot(ac, ap)
    d3, d4 = dot(ab, bp), dot(ac, bp)
    d5, d6 = dot(ab, cp), dot(ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    with np.errstate(divide='ignore', invalid='ignore'):
        on_ab = a + (d1 / (d1 - d3))[..., None] * ab
        on_ac = a + (d2 / (d2 - d6))[..., None] * ac
        on_bc = b + ((d4 - d3) / ((d4 - d3) + (d5 - d6)))[..., None] * (c - b)
        total = va + vb + vc
        inside = a + (vb / total)[..., None] * ab + (vc / total)[..., None] * ac

    conditions = [
        (d1 <= 0) & (d2 <= 0),
        (d3 >= 0) & (d4 <= d3),
        (d6 >= 0) & (d5 <= d6),
        (vc <= 0) & (d1 >= 0) & (d3 <= 0),
        (vb <= 0) & (d2 >= 0) & (d6 <= 0),
        (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0),
    ]
    choices = [a, b, c, on_ab, on_ac, on_bc]
    shape = np.broadcast_shapes(queries.shape, a.shape)
    result = np.broadcast_to(inside, shape).copy()
    for condition, choice in zip(reversed(conditions), reversed(choices), strict=True):
        result = np.where(condition[..., None], np.broadcast_to(choice, shape), result)
    return result


def closest_points_on_mesh(
    mesh: TriMesh, queries: npt.ArrayLike, candidates: int = 16
) -> ClosestPoints:
    """Closest mesh point to every query among the triangles with the nearest centroids."""
    points = np.asarray(queries, dtype=float).reshape(-1, 3)
    corners = mesh.corners()
    tree = cKDTree(corners.mean(axis=1))
    k = min(candidates, mesh.triangle_count)
    _, nearest = tree.query(points, k=k)
    nearest = np.asarray(nearest).reshape(len(points), k)
    local = corners[nearest]
    projected = closest_on_triangles(
        points[:, None, :], local[:, :, 0], local[:, :, 1], local[:, :, 2]
    )
    gaps = np.linalg.norm(projected - points[:, None, :], axis=-1)
    best = np.argmin(gaps, axis=1)
    rows = np.arange(len(points))
    closest = projected[rows, best]
    return ClosestPoints(
        points=closest,
        triangles=nearest[rows, best],
        euclidean=gaps[rows, best],
        hyperbolic=np.atleast_1d(distance(points, closest)),
    )
