import enum
import functools
import logging
import typing as t

import numpy as np
import numpy.typing as npt
import pydantic

from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

_logger = logging.getLogger(__name__)

MIN_ANGLE_DEGREES = 1.0


class MeshInvariantError(ValueError):
    pass


class Topology(enum.StrEnum):
    DISK = 'disk'
    ANNULUS = 'annulus'
    SPHERE = 'sphere'

    @property
    def euler_characteristic(self) -> int:
        return {Topology.DISK: 1, Topology.ANNULUS: 0, Topology.SPHERE: 2}[self]


def undirected_edges(triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unique sorted edges, the edge index of every half-edge and per-edge face counts.

    Half-edge ``3*f + i`` runs from ``triangles[f, i]`` to ``triangles[f, (i + 1) % 3]``.
    """
    half = np.stack([triangles, np.roll(triangles, -1, axis=1)], axis=-1).reshape(-1, 2)
    if len(half) == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0, int)
    keys = np.sort(half, axis=1)
    edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    return edges, inverse.reshape(-1), counts


def boundary_half_edges(triangles: np.ndarray) -> np.ndarray:
    """Directed boundary edges ``(a, b)`` in the orientation of their triangle."""
    if len(triangles) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    half = np.stack([triangles, np.roll(triangles, -1, axis=1)], axis=-1).reshape(-1, 2)
    _, inverse, counts = undirected_edges(triangles)
    return half[counts[inverse] == 1]


def boundary_loops_from_triangles(triangles: np.ndarray) -> tuple[np.ndarray, ...]:
    """Boundary loops following the triangle orientation, each starting at its smallest index."""
    directed = boundary_half_edges(triangles)
    following: dict[int, int] = {}
    for start, end in directed:
        if int(start) in following:
            raise MeshInvariantError(f'Boundary vertex {int(start)} has two outgoing edges')
        following[int(start)] = int(end)

    loops: list[np.ndarray] = []
    remaining = set(following)
    while remaining:
        first = min(remaining)
        loop = [first]
        remaining.discard(first)
        current = following[first]
        while current != first:
            if current not in remaining:
                raise MeshInvariantError(f'Boundary walk from {first} does not close')
            loop.append(current)
            remaining.discard(current)
            current = following[current]
        loops.append(np.array(loop, dtype=np.int64))
    return tuple(loops)


def triangle_angles(corners: np.ndarray) -> np.ndarray:
    """Interior angles in radians of triangles given as ``(m, 3, 3)`` corner arrays."""
    angles = np.empty(corners.shape[:2])
    for i in range(3):
        first = corners[:, (i + 1) % 3] - corners[:, i]
        second = corners[:, (i + 2) % 3] - corners[:, i]
        cross = np.linalg.norm(np.cross(first, second), axis=-1)
        dot = np.sum(first * second, axis=-1)
        angles[:, i] = np.arctan2(cross, dot)
    return angles


class TriMesh(pydantic.BaseModel):
    """Oriented triangle mesh in the open unit ball with fixed boundary loops.

    Structural checks run on construction. The full invariant set (manifold,
    boundary consistency, Euler characteristic, minimum angle) is enforced by
    :meth:`build` and :meth:`check_invariants`; the solver uses
    :meth:`with_vertices` for cheap copies between checks.
    """

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loops: tuple[np.ndarray, ...] = ()
    topology: Topology

    @pydantic.field_validator('vertices', mode='before')
    @classmethod
    def check_vertices(cls, value: t.Any) -> np.ndarray:
        array = np.array(value, dtype=float)
        if array.ndim != 2 or array.shape[1] != 3:
            array = array.reshape(-1, 3)
        array.setflags(write=False)
        return array

    @pydantic.field_validator('triangles', mode='before')
    @classmethod
    def check_triangles(cls, value: t.Any) -> np.ndarray:
        array = np.array(value, dtype=np.int64).reshape(-1, 3)
        array.setflags(write=False)
        return array

    @pydantic.field_validator('boundary_loops', mode='before')
    @classmethod
    def check_loops(cls, value: t.Any) -> tuple[np.ndarray, ...]:
        return tuple(np.array(loop, dtype=np.int64) for loop in value)

    @pydantic.model_validator(mode='after')
    def check_structure(self) -> 'TriMesh':
        check_structure(self.vertices, self.triangles)
        return self

    @classmethod
    def build(
        cls,
        vertices: npt.ArrayLike,
        triangles: npt.ArrayLike,
        topology: Topology,
        boundary_loops: t.Sequence[npt.ArrayLike] | None = None,
        min_angle: float = MIN_ANGLE_DEGREES,
    ) -> 'TriMesh':
        """Construct and fully validate a mesh, deriving boundary loops when omitted."""
        vertex_array = np.asarray(vertices, dtype=float).reshape(-1, 3)
        triangle_array = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        check_structure(vertex_array, triangle_array)
        if boundary_loops is None:
            loops = boundary_loops_from_triangles(triangle_array)
        else:
            loops = tuple(np.asarray(loop, dtype=np.int64) for loop in boundary_loops)
        mesh = cls(
            vertices=vertex_array, triangles=triangle_array, boundary_loops=loops, topology=topology
        )
        mesh.check_invariants(min_angle)
        return mesh

    @classmethod
    def empty(cls) -> 'TriMesh':
        return cls.model_construct(
            vertices=np.zeros((0, 3)),
            triangles=np.zeros((0, 3), dtype=np.int64),
            boundary_loops=(),
            topology=Topology.DISK,
        )

    def with_vertices(self, vertices: npt.ArrayLike) -> 'TriMesh':
        array = np.array(vertices, dtype=float).reshape(self.vertices.shape)
        array.setflags(write=False)
        return self.model_copy(update={'vertices': array})

    def flipped(self) -> 'TriMesh':
        return self.model_copy(
            update={
                'triangles': np.ascontiguousarray(self.triangles[:, ::-1]),
                'boundary_loops': tuple(
                    np.roll(loop[::-1], 1) for loop in self.boundary_loops
                ),
            }
        )

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    def edges(self) -> np.ndarray:
        return undirected_edges(self.triangles)[0]

    def euler_characteristic(self) -> int:
        return self.vertex_count - len(self.edges()) + self.triangle_count

    @functools.cached_property
    def fixed_mask(self) -> np.ndarray:
        mask = np.zeros(self.vertex_count, dtype=bool)
        for loop in self.boundary_loops:
            mask[loop] = True
        return mask

    @property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.fixed_mask)

    def corners(self) -> np.ndarray:
        return self.vertices[self.triangles]

    def area_vectors(self) -> np.ndarray:
        """Per-triangle Euclidean area vectors (half the edge cross product)."""
        c = self.corners()
        return 0.5 * np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])

    def euclidean_areas(self) -> np.ndarray:
        return np.linalg.norm(self.area_vectors(), axis=1)

    def vertex_normals(self) -> np.ndarray:
        """Area-weighted unit vertex normals."""
        normals = np.zeros_like(self.vertices)
        area_vectors = self.area_vectors()
        for i in range(3):
            np.add.at(normals, self.triangles[:, i], area_vectors)
        norms = np.linalg.norm(normals, axis=1)
        return normals / np.where(norms > 0.0, norms, 1.0)[:, None]

    def min_angle_degrees(self) -> float:
        if self.triangle_count == 0:
            return 180.0
        return float(np.degrees(np.min(triangle_angles(self.corners()))))

    def check_invariants(self, min_angle: float = MIN_ANGLE_DEGREES) -> None:
        check_structure(self.vertices, self.triangles)
        _, inverse, counts = undirected_edges(self.triangles)
        if np.any(counts > 2):
            raise MeshInvariantError(f'{int(np.sum(counts > 2))} edges shared by more than 2 faces')

        half = np.stack([self.triangles, np.roll(self.triangles, -1, axis=1)], axis=-1)
        half = half.reshape(-1, 2)
        _, directed_counts = np.unique(half, axis=0, return_counts=True)
        if np.any(directed_counts > 1):
            raise MeshInvariantError('Inconsistent triangle orientation')

        boundary = {tuple(sorted(map(int, edge))) for edge in boundary_half_edges(self.triangles)}
        declared: set[tuple[int, int]] = set()
        for loop in self.boundary_loops:
            for a, b in zip(loop, np.roll(loop, -1), strict=True):
                declared.add((min(int(a), int(b)), max(int(a), int(b))))
        if boundary != declared:
            raise MeshInvariantError(
                f'Boundary loops cover {len(declared)} edges, mesh has {len(boundary)}'
            )

        referenced = np.unique(self.triangles)
        if len(referenced) != self.vertex_count:
            raise MeshInvariantError(
                f'{self.vertex_count - len(referenced)} vertices are not used by any triangle'
            )

        chi = self.euler_characteristic()
        if chi != self.topology.euler_characteristic:
            raise MeshInvariantError(
                f'Euler characteristic {chi} does not match topology {self.topology}'
            )

        smallest = self.min_angle_degrees()
        if smallest < min_angle:
            raise MeshInvariantError(
                f'Minimum triangle angle {smallest:.4f} deg below {min_angle} deg'
            )

    def connected_components(self) -> tuple[int, np.ndarray]:
        """Number of components and a component label per vertex."""
        n = self.vertex_count
        if n == 0:
            return 0, np.zeros(0, dtype=np.int64)
        edges = self.edges()
        adjacency = coo_matrix(
            (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n)
        ).tocsr()
        count, labels = connected_components(adjacency, directed=False)
        return int(count), labels

    def restrict(self, triangle_mask: npt.ArrayLike) -> 'TriMesh':
        """Unvalidated sub-mesh on the selected triangles, vertices re-indexed.

        Boundary loops are left empty when the selection pinches at a vertex.
        """
        selected = self.triangles[np.asarray(triangle_mask, dtype=bool)]
        used, inverse = np.unique(selected, return_inverse=True)
        triangles = inverse.reshape(-1, 3)
        try:
            loops = boundary_loops_from_triangles(triangles) if len(selected) else ()
        except MeshInvariantError:
            loops = ()
        return TriMesh.model_construct(
            vertices=self.vertices[used],
            triangles=triangles,
            boundary_loops=loops,
            topology=self.topology,
        )


def check_structure(vertices: np.ndarray, triangles: np.ndarray) -> None:
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshInvariantError(f'Vertices must have shape (n, 3), got {vertices.shape}')
    if len(triangles) and (triangles.min() < 0 or triangles.max() >= len(vertices)):
        raise MeshInvariantError('Triangle index out of range')
    if len(triangles) and np.any(
        (triangles[:, 0] == triangles[:, 1])
        | (triangles[:, 1] == triangles[:, 2])
        | (triangles[:, 0] == triangles[:, 2])
    ):
        raise MeshInvariantError('Triangle with repeated vertex')
    if len(vertices):
        largest = float(np.max(np.linalg.norm(vertices, axis=1)))
        if not largest < 1.0:
            raise MeshInvariantError(f'Vertex at |v|={largest} is not inside the unit ball')
        if not np.all(np.isfinite(vertices)):
            raise MeshInvariantError('Non-finite vertex coordinates')


class ParamGrid(pydantic.BaseModel):
    """Samples of a map ``u: [-1, 1]² → R³`` on an ``M x M`` grid, ``u[i, j] = u(x_i, y_j)``."""

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray

    @pydantic.field_validator('values', mode='before')
    @classmethod
    def check_values(cls, value: t.Any) -> np.ndarray:
        array = np.array(value, dtype=float)
        if array.ndim != 3 or array.shape[0] != array.shape[1] or array.shape[2] != 3:
            raise MeshInvariantError(f'Grid values must have shape (M, M, 3), got {array.shape}')
        if array.shape[0] < 16:
            raise MeshInvariantError(f'Grid needs M >= 16, got {array.shape[0]}')
        array.setflags(write=False)
        return array

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return 2.0 / (self.size - 1)

    @property
    def coordinates(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.size)


def param_grid_from_function(
    function: t.Callable[[np.ndarray, np.ndarray], np.ndarray], size: int
) -> ParamGrid:
    """Sample ``function(x, y) -> (..., 3)`` on the grid over ``[-1, 1]²``."""
    axis = np.linspace(-1.0, 1.0, size)
    x, y = np.meshgrid(axis, axis, indexing='ij')
    return ParamGrid(values=function(x, y))

