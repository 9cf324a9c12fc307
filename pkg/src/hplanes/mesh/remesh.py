"""Isotropic remeshing against a hyperbolic edge-length target.

Each round splits long edges, collapses short ones, flips edges toward regular
valence and relaxes interior vertices in their tangent planes. Boundary loops
are fixed: boundary vertices never move and boundary edges are only split at
their chord midpoint.
"""

import logging
import math
import typing as t

import numpy as np
from scipy.sparse import coo_matrix

from hplanes.hyperbolic import InvalidParameterError, distance
from hplanes.mesh.model import (
    MIN_ANGLE_DEGREES,
    MeshInvariantError,
    TriMesh,
    triangle_angles,
)

_logger = logging.getLogger(__name__)

SPLIT_RATIO = 4.0 / 3.0
COLLAPSE_RATIO = 4.0 / 5.0
_SPLIT_ROUNDS = 8
_RELAX_ROUNDS = 5


class RemeshingError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict[str, t.Any] | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def _third(face: list[int], a: int, b: int) -> int:
    """Vertex completing the oriented half-edge ``a -> b`` of ``face``."""
    i = face.index(a)
    return face[(i + 2) % 3]


class _Workspace:
    def __init__(self, mesh: TriMesh, min_angle: float) -> None:
        self.points: list[np.ndarray] = [np.array(p) for p in mesh.vertices]
        self.faces: list[list[int] | None] = [list(map(int, f)) for f in mesh.triangles]
        self.fixed: list[bool] = list(mesh.fixed_mask)
        self.removed: set[int] = set()
        self.loops: list[list[int]] = [list(map(int, loop)) for loop in mesh.boundary_loops]
        self.min_angle = math.radians(min_angle)
        self.half: dict[tuple[int, int], int] = {}
        self.vertex_faces: list[set[int]] = [set() for _ in self.points]
        for index, face in enumerate(self.faces):
            self._link(index, t.cast(list[int], face))
        self.stats = {'splits': 0, 'collapses': 0, 'flips': 0, 'relaxed': 0}

    def _link(self, index: int, face: list[int]) -> None:
        for i in range(3):
            self.half[(face[i], face[(i + 1) % 3])] = index
            self.vertex_faces[face[i]].add(index)

    def _unlink(self, index: int) -> None:
        face = self.faces[index]
        assert face is not None
        for i in range(3):
            self.half.pop((face[i], face[(i + 1) % 3]), None)
            self.vertex_faces[face[i]].discard(index)

    def set_face(self, index: int, face: list[int]) -> None:
        self._unlink(index)
        self.faces[index] = face
        self._link(index, face)

    def add_face(self, face: list[int]) -> None:
        self.faces.append(face)
        self._link(len(self.faces) - 1, face)

    def drop_face(self, index: int) -> None:
        self._unlink(index)
        self.faces[index] = None

    def add_point(self, point: np.ndarray, fixed: bool) -> int:
        self.points.append(point)
        self.fixed.append(fixed)
        self.vertex_faces.append(set())
        return len(self.points) - 1

    def neighbours(self, v: int) -> set[int]:
        result: set[int] = set()
        for index in self.vertex_faces[v]:
            result.update(t.cast(list[int], self.faces[index]))
        result.discard(v)
        return result

    def valence(self, v: int) -> int:
        return len(self.neighbours(v))

    def edges(self) -> list[tuple[int, int]]:
        return sorted({(min(a, b), max(a, b)) for a, b in self.half})

    def length(self, a: int, b: int) -> float:
        return float(distance(self.points[a], self.points[b]))

    def acceptable(
        self, changes: t.Iterable[tuple[list[int], list[int]]], positions: dict[int, np.ndarray]
    ) -> bool:
        """Whether rewritten faces keep their orientation and the angle bound."""
        for face, new_face in changes:
            old = np.array([self.points[v] for v in face])
            new = np.array([positions.get(v, self.points[v]) for v in new_face])
            old_normal = np.cross(old[1] - old[0], old[2] - old[0])
            new_normal = np.cross(new[1] - new[0], new[2] - new[0])
            if np.dot(old_normal, new_normal) <= 0.0:
                return False
            if np.min(triangle_angles(new[None])) < self.min_angle:
                return False
        return True

    def insert_into_loop(self, a: int, b: int, middle: int) -> None:
        for loop in self.loops:
            n = len(loop)
            for i, v in enumerate(loop):
                if (v, loop[(i + 1) % n]) in ((a, b), (b, a)):
                    loop.insert(i + 1, middle)
                    return
        raise RemeshingError(f'Boundary edge ({a}, {b}) is not on a boundary loop')

    def split(self, a: int, b: int) -> bool:
        first = self.half.get((a, b))
        second = self.half.get((b, a))
        boundary = first is None or second is None
        middle_point = 0.5 * (self.points[a] + self.points[b])
        planned: list[tuple[int | None, list[int], list[int]]] = []
        for index, (p, q) in ((first, (a, b)), (second, (b, a))):
            if index is None:
                continue
            c = _third(t.cast(list[int], self.faces[index]), p, q)
            planned.append((index, [p, -1, c], [-1, q, c]))

        candidates = []
        for _, left, right in planned:
            for face in (left, right):
                corners = np.array([middle_point if v == -1 else self.points[v] for v in face])
                candidates.append(corners)
        if np.min(triangle_angles(np.array(candidates))) < self.min_angle:
            return False

        middle = self.add_point(middle_point, boundary)
        for index, left, right in planned:
            self.set_face(t.cast(int, index), [middle if v == -1 else v for v in left])
            self.add_face([middle if v == -1 else v for v in right])
        if boundary:
            self.insert_into_loop(a, b, middle)
        return True

    def collapse(self, a: int, b: int, high: float) -> bool:
        """Merge ``a`` into ``b``; boundary vertices are never removed."""
        if self.fixed[a] and self.fixed[b]:
            return False
        if self.fixed[a]:
            a, b = b, a
        if (a, b) not in self.half and (b, a) not in self.half:
            return False
        opposite = set()
        for p, q in ((a, b), (b, a)):
            index = self.half.get((p, q))
            if index is not None:
                opposite.add(_third(t.cast(list[int], self.faces[index]), p, q))
        if self.neighbours(a) & self.neighbours(b) != opposite:
            return False

        target = self.points[b] if self.fixed[b] else 0.5 * (self.points[a] + self.points[b])
        movers = self.neighbours(a) | (set() if self.fixed[b] else self.neighbours(b))
        for x in movers - {a, b}:
            if float(distance(target, self.points[x])) > high:
                return False

        shared = [i for i in self.vertex_faces[a] if b in t.cast(list[int], self.faces[i])]
        kept = (self.vertex_faces[a] | self.vertex_faces[b]) - set(shared)
        faces = [t.cast(list[int], self.faces[index]) for index in kept]
        changes = [(face, [b if v == a else v for v in face]) for face in faces]
        if not self.acceptable(changes, {a: target, b: target}):
            return False

        for index in shared:
            self.drop_face(index)
        for index in list(self.vertex_faces[a]):
            face = t.cast(list[int], self.faces[index])
            self.set_face(index, [b if v == a else v for v in face])
        self.points[b] = target
        self.removed.add(a)
        return True

    def flip(self, a: int, b: int) -> bool:
        first = self.half.get((a, b))
        second = self.half.get((b, a))
        if first is None or second is None:
            return False
        c = _third(t.cast(list[int], self.faces[first]), a, b)
        d = _third(t.cast(list[int], self.faces[second]), b, a)
        if c == d or (c, d) in self.half or (d, c) in self.half:
            return False

        def deviation(vertex: int, change: int) -> int:
            target = 4 if self.fixed[vertex] else 6
            return abs(self.valence(vertex) + change - target)

        before = sum(deviation(v, 0) for v in (a, b, c, d))
        after = deviation(a, -1) + deviation(b, -1) + deviation(c, 1) + deviation(d, 1)
        if after >= before:
            return False

        left, right = [a, d, c], [d, b, c]
        normal = np.cross(self.points[b] - self.points[a], self.points[c] - self.points[a])
        normal += np.cross(self.points[a] - self.points[b], self.points[d] - self.points[b])
        for face in (left, right):
            corners = np.array([self.points[v] for v in face])
            if np.dot(np.cross(corners[1] - corners[0], corners[2] - corners[0]), normal) <= 0.0:
                return False
            if np.min(triangle_angles(corners[None])) < self.min_angle:
                return False
        self.set_face(first, left)
        self.set_face(second, right)
        return True

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Live vertex positions, faces and the old-to-new index map (-1 when removed)."""
        live = [i for i in range(len(self.points)) if i not in self.removed]
        mapping = np.full(len(self.points), -1, dtype=np.int64)
        mapping[live] = np.arange(len(live))
        faces = np.array([f for f in self.faces if f is not None], dtype=np.int64).reshape(-1, 3)
        return np.array([self.points[i] for i in live]), mapping[faces], mapping

    def relax(self) -> None:
        live = [i for i in range(len(self.points)) if i not in self.removed]
        positions = np.array(self.points)
        faces = np.array([f for f in self.faces if f is not None], dtype=np.int64)
        n = len(positions)
        rows = np.concatenate([faces[:, 0], faces[:, 1], faces[:, 2]])
        cols = np.concatenate([faces[:, 1], faces[:, 2], faces[:, 0]])
        adjacency = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
        adjacency = ((adjacency + adjacency.T) > 0).astype(float)
        degree = np.asarray(adjacency.sum(axis=1)).ravel()
        centroid = (adjacency @ positions) / np.maximum(degree, 1.0)[:, None]

        normals = np.zeros_like(positions)
        face_normals = np.cross(
            positions[faces[:, 1]] - positions[faces[:, 0]],
            positions[faces[:, 2]] - positions[faces[:, 0]],
        )
        for i in range(3):
            np.add.at(normals, faces[:, i], face_normals)
        normals /= np.maximum(np.linalg.norm(normals, axis=1), 1e-300)[:, None]

        movable = np.zeros(n, dtype=bool)
        movable[live] = True
        movable &= ~np.array(self.fixed) & (degree > 0)
        step = centroid - positions
        step -= np.sum(step * normals, axis=1)[:, None] * normals
        for _ in range(_RELAX_ROUNDS):
            trial = positions + np.where(movable[:, None], step, 0.0)
            old = positions[faces]
            new = trial[faces]
            old_normal = np.cross(old[:, 1] - old[:, 0], old[:, 2] - old[:, 0])
            new_normal = np.cross(new[:, 1] - new[:, 0], new[:, 2] - new[:, 0])
            bad = np.sum(old_normal * new_normal, axis=1) <= 0.0
            bad |= np.min(triangle_angles(new), axis=1) < self.min_angle
            bad |= np.max(np.linalg.norm(new, axis=-1), axis=1) >= 1.0
            if not np.any(bad):
                break
            movable[faces[bad].ravel()] = False
        else:
            return
        for i in np.flatnonzero(movable):
            self.points[i] = trial[i]
        self.stats['relaxed'] += int(np.sum(movable))


def _split_pass(space: _Workspace, high: float) -> None:
    for _ in range(_SPLIT_ROUNDS):
        long_edges = [(space.length(a, b), a, b) for a, b in space.edges()]
        long_edges = sorted((e for e in long_edges if e[0] > high), reverse=True)
        if not long_edges:
            return
        touched: set[int] = set()
        done = 0
        for _, a, b in long_edges:
            if a in touched or b in touched:
                continue
            if space.split(a, b):
                touched.update(space.neighbours(a) | space.neighbours(b) | {a, b})
                done += 1
        space.stats['splits'] += done
        if done == 0:
            return


def _collapse_pass(space: _Workspace, low: float, high: float) -> None:
    short_edges = sorted((space.length(a, b), a, b) for a, b in space.edges())
    for length, a, b in short_edges:
        if length >= low:
            break
        if a in space.removed or b in space.removed:
            continue
        if space.collapse(a, b, high):
            space.stats['collapses'] += 1


def _flip_pass(space: _Workspace) -> None:
    for a, b in space.edges():
        if space.flip(a, b):
            space.stats['flips'] += 1


def refine_and_improve(
    mesh: TriMesh,
    target_edge_length: float | None,
    rounds: int = 3,
    min_angle: float = MIN_ANGLE_DEGREES,
) -> TriMesh:
    """Remesh toward a hyperbolic edge length, keeping topology and boundary loops.

    With ``target_edge_length=None`` only valence flips and tangential
    relaxation run, so vertex indices of the boundary loops stay unchanged.
    """
    if target_edge_length is not None and not target_edge_length > 0.0:
        raise InvalidParameterError(f'Target edge length must be positive: {target_edge_length}')
    space = _Workspace(mesh, min_angle)
    for _ in range(rounds):
        if target_edge_length is not None:
            high = SPLIT_RATIO * target_edge_length
            _split_pass(space, high)
            _collapse_pass(space, COLLAPSE_RATIO * target_edge_length, high)
        _flip_pass(space)
        space.relax()

    vertices, triangles, mapping = space.arrays()
    loops = [mapping[np.array(loop, dtype=np.int64)] for loop in space.loops]
    try:
        result = TriMesh.build(vertices, triangles, mesh.topology, loops, min_angle=min_angle)
    except MeshInvariantError as exc:
        message = f'Remeshed surface violates mesh invariants: {exc}'
        raise RemeshingError(message, space.stats) from exc
    _logger.debug(
        'Remeshed %d -> %d vertices (%s)', mesh.vertex_count, result.vertex_count, space.stats
    )
    return result
