"""Mesh builders for disks, annuli and geodesic spheres."""

import logging
import math
import typing as t

import numpy as np
import numpy.typing as npt

from hplanes.curves import orthonormal_frame
from hplanes.hyperbolic import InvalidParameterError
from hplanes.mesh.model import Topology, TriMesh

_logger = logging.getLogger(__name__)

type Embedding = t.Callable[[np.ndarray, np.ndarray], np.ndarray]


def _zip_rings(inner: np.ndarray, outer: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate the strip between two closed rings, counter-clockwise in azimuth."""
    if len(inner) == 1:
        return [
            (int(inner[0]), int(outer[j]), int(outer[(j + 1) % len(outer)]))
            for j in range(len(outer))
        ]
    triangles: list[tuple[int, int, int]] = []
    n_in, n_out = len(inner), len(outer)
    i = j = 0
    while i < n_in or j < n_out:
        # advance along whichever ring lags in normalized azimuth
        advance_outer = i >= n_in or (j < n_out and (j + 1) / n_out <= (i + 1) / n_in)
        if advance_outer:
            triangles.append((int(inner[i % n_in]), int(outer[j]), int(outer[(j + 1) % n_out])))
            j += 1
        else:
            triangles.append(
                (int(inner[i]), int(outer[j % n_out]), int(inner[(i + 1) % n_in]))
            )
            i += 1
    return triangles


def _polar_arrays(
    embed: Embedding, rings: int, counts: t.Sequence[int] | None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if rings < 1:
        raise InvalidParameterError(f'Need at least one ring, got {rings}')
    ring_counts = list(counts) if counts is not None else [6 * i for i in range(1, rings + 1)]
    if len(ring_counts) != rings or min(ring_counts) < 3:
        raise InvalidParameterError(f'Ring counts {ring_counts} do not match {rings} rings')

    center = np.asarray(embed(np.zeros(1), np.zeros(1)), dtype=float).reshape(1, 3)
    blocks = [center]
    ring_indices = [np.array([0])]
    start = 1
    for i, count in enumerate(ring_counts, start=1):
        azimuth = 2.0 * math.pi * np.arange(count) / count
        points = np.asarray(embed(np.full(count, i / rings), azimuth), dtype=float)
        blocks.append(points.reshape(count, 3))
        ring_indices.append(np.arange(start, start + count))
        start += count

    triangles: list[tuple[int, int, int]] = []
    for inner, outer in zip(ring_indices[:-1], ring_indices[1:], strict=True):
        triangles.extend(_zip_rings(inner, outer))
    return np.concatenate(blocks), np.array(triangles, dtype=np.int64), ring_indices[-1]


def polar_disk(
    embed: Embedding, rings: int, counts: t.Sequence[int] | None = None, min_angle: float = 1.0
) -> TriMesh:
    """Disk mesh from an embedding of polar coordinates ``(fraction, azimuth)``.

    Ring ``i`` holds ``6 i`` vertices unless ``counts`` is given; ring ``rings``
    is the boundary loop. Triangles are counter-clockwise in increasing azimuth.
    """
    vertices, triangles, boundary = _polar_arrays(embed, rings, counts)
    return TriMesh.build(vertices, triangles, Topology.DISK, [boundary], min_angle=min_angle)


def flat_disk(r: float, rings: int = 12, axis: npt.ArrayLike = (0.0, 0.0, 1.0)) -> TriMesh:
    """Totally geodesic disk through the origin, truncated at hyperbolic radius ``r``."""
    if r <= 0.0:
        raise InvalidParameterError(f'Radius must be positive, got {r}')
    rho = math.tanh(r / 2.0)
    u, w = orthonormal_frame(np.asarray(axis, dtype=float))

    def embed(fraction: np.ndarray, azimuth: np.ndarray) -> np.ndarray:
        radial = rho * fraction
        return radial[:, None] * (
            np.cos(azimuth)[:, None] * u + np.sin(azimuth)[:, None] * w
        )

    return polar_disk(embed, rings)


def cone_fill(
    boundary: npt.ArrayLike, apex: npt.ArrayLike | None = None, rings: int | None = None
) -> TriMesh:
    """Fill a closed polyline by rings shrinking linearly toward ``apex``.

    The boundary loop of the result is the polyline in input order.
    """
    points = np.asarray(boundary, dtype=float)
    n = len(points)
    if n < 3:
        raise InvalidParameterError(f'Boundary needs at least 3 points, got {n}')
    center = np.mean(points, axis=0) if apex is None else np.asarray(apex, dtype=float)
    ring_total = rings if rings is not None else max(2, math.ceil(n / 6))
    counts = [min(6 * i, n) for i in range(1, ring_total)] + [n]
    closed = np.vstack([points, points[:1]])

    def embed(fraction: np.ndarray, azimuth: np.ndarray) -> np.ndarray:
        position = azimuth * n / (2.0 * math.pi)
        index = np.clip(np.floor(position).astype(int), 0, n - 1)
        local = (position - index)[:, None]
        on_curve = (1.0 - local) * closed[index] + local * closed[index + 1]
        return center + fraction[:, None] * (on_curve - center)

    vertices, triangles, outer = _polar_arrays(embed, ring_total, counts)
    vertices[outer] = points
    return TriMesh.build(vertices, triangles, Topology.DISK, [outer])


def icosphere(r: float, subdivisions: int = 3) -> TriMesh:
    """Geodesic sphere of hyperbolic radius ``r`` about the origin, normals outward."""
    if r <= 0.0:
        raise InvalidParameterError(f'Radius must be positive, got {r}')
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    vertices = np.array(
        [
            (-1, golden, 0), (1, golden, 0), (-1, -golden, 0), (1, -golden, 0),
            (0, -1, golden), (0, 1, golden), (0, -1, -golden), (0, 1, -golden),
            (golden, 0, -1), (golden, 0, 1), (-golden, 0, -1), (-golden, 0, 1),
        ],
        dtype=float,
    )  # fmt: skip
    triangles = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=np.int64,
    )  # fmt: skip
    vertices /= np.linalg.norm(vertices, axis=1, keepdims=True)

    for _ in range(subdivisions):
        half = np.stack([triangles, np.roll(triangles, -1, axis=1)], axis=-1).reshape(-1, 2)
        edges, inverse = np.unique(np.sort(half, axis=1), axis=0, return_inverse=True)
        middle = (len(vertices) + inverse.reshape(-1)).reshape(-1, 3)
        midpoints = vertices[edges[:, 0]] + vertices[edges[:, 1]]
        vertices = np.vstack([vertices, midpoints / np.linalg.norm(midpoints, axis=1)[:, None]])
        a, b, c = triangles.T
        ab, bc, ca = middle.T
        triangles = np.concatenate(
            [
                np.stack([a, ab, ca], axis=1),
                np.stack([b, bc, ab], axis=1),
                np.stack([c, ca, bc], axis=1),
                np.stack([ab, bc, ca], axis=1),
            ]
        )

    corners = vertices[triangles]
    signed = np.einsum('ij,ij->i', corners[:, 0], np.cross(corners[:, 1], corners[:, 2]))
    if np.sum(signed) < 0.0:
        triangles = triangles[:, ::-1]
    return TriMesh.build(math.tanh(r / 2.0) * vertices, triangles, Topology.SPHERE, [])


def _strip_triangles(rows: t.Sequence[np.ndarray]) -> np.ndarray:
    triangles: list[tuple[int, int, int]] = []
    for lower, upper in zip(rows[:-1], rows[1:], strict=True):
        n = len(lower)
        for j in range(n):
            k = (j + 1) % n
            triangles.append((int(lower[j]), int(upper[j]), int(upper[k])))
            triangles.append((int(lower[j]), int(upper[k]), int(lower[k])))
    return np.array(triangles, dtype=np.int64).reshape(-1, 3)


def interpolate_rows(
    first: np.ndarray, second: np.ndarray, rows: int, sag: float = 0.0
) -> list[np.ndarray]:
    """``rows + 1`` loops blending ``first`` into ``second``, middle rows pulled toward 0."""
    blended = []
    for k in range(rows + 1):
        fraction = k / rows
        loop = (1.0 - fraction) * first + fraction * second
        blended.append(loop * (1.0 - sag * math.sin(math.pi * fraction)))
    return blended


def annulus_between(
    loop_a: npt.ArrayLike, loop_b: npt.ArrayLike, rows: int = 8, sag: float = 0.0
) -> TriMesh:
    """Annulus whose boundary loops are the two given polylines with matching indices."""
    first = np.asarray(loop_a, dtype=float)
    second = np.asarray(loop_b, dtype=float)
    if first.shape != second.shape or len(first) < 3:
        raise InvalidParameterError(
            f'Annulus loops must have matching shapes, got {first.shape} and {second.shape}'
        )
    if rows < 1:
        raise InvalidParameterError(f'Annulus needs at least one row, got {rows}')
    return annulus_from_rows(interpolate_rows(first, second, rows, sag))


def annulus_from_rows(rows: t.Sequence[npt.ArrayLike]) -> TriMesh:
    """Annulus through closed rows of equal length; the first and last rows are its boundary."""
    arrays = [np.asarray(row, dtype=float) for row in rows]
    if len(arrays) < 2 or len({row.shape for row in arrays}) != 1:
        raise InvalidParameterError('Annulus rows must be at least two loops of equal shape')
    n = len(arrays[0])
    indices = [np.arange(k * n, (k + 1) * n) for k in range(len(arrays))]
    return TriMesh.build(np.concatenate(arrays), _strip_triangles(indices), Topology.ANNULUS)


def extend_disk(disk: TriMesh, rows: t.Sequence[npt.ArrayLike]) -> TriMesh:
    """Glue rings onto a disk's boundary loop; the last row becomes the new boundary.

    ``rows[k][j]`` must continue the disk's boundary vertex ``boundary_loops[0][j]``.
    """
    if disk.topology != Topology.DISK or len(disk.boundary_loops) != 1:
        raise InvalidParameterError('Only disks with a single boundary loop can be extended')
    loop = disk.boundary_loops[0]
    blocks = [disk.vertices]
    indices = [loop]
    start = disk.vertex_count
    for row in rows:
        points = np.asarray(row, dtype=float)
        if points.shape != (len(loop), 3):
            raise InvalidParameterError(
                f'Row of shape {points.shape} does not match a boundary of {len(loop)} vertices'
            )
        blocks.append(points)
        indices.append(np.arange(start, start + len(loop)))
        start += len(loop)
    if len(indices) == 1:
        return disk
    triangles = np.concatenate([disk.triangles, _strip_triangles(indices)])
    return TriMesh.build(np.concatenate(blocks), triangles, Topology.DISK, [indices[-1]])
