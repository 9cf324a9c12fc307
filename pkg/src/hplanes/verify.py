"""Independent geometric checks on solved meshes.

Every check returns a :class:`CheckReport` whose ``violation`` is a worst-case
magnitude in the check's own unit; a check passes exactly when that magnitude
does not exceed its tolerance.
"""

import logging
import math
import typing as t

import numpy as np
import numpy.typing as npt
import pydantic
from scipy.spatial import cKDTree

from hplanes.curves import IdealCurve, RoundCircle, resample, rotation_between, side_of
from hplanes.exhaustion import run_exhaustion
from hplanes.hyperbolic import (
    ORIGIN,
    BallPoint,
    InvalidParameterError,
    distance_to_origin,
    to_upper_half_space,
)
from hplanes.mesh.closest import closest_points_on_mesh
from hplanes.mesh.energy import (
    DEFAULT_ORDER,
    area_gradient,
    vertex_mean_curvature,
    volume_gradient,
)
from hplanes.mesh.model import TriMesh
from hplanes.solver import SolverConfig, SolverError
from hplanes.telemetry import telemetry
from hplanes.umbilic import (
    ShiftedHalfspace,
    ShiftedHullSampler,
    UmbilicCap,
    supporting_halfspaces,
)

_logger = logging.getLogger(__name__)

CONTACT_TOLERANCE = 1e-3
CURVATURE_TOLERANCE = 0.05
GRAPH_BINS = (64, 16)
_NORTH = np.array([0.0, 0.0, 1.0])


class CheckReport(pydantic.BaseModel):
    name: str
    passed: bool
    violation: float
    tolerance: float
    location: list[float] | None = None
    provenance: dict[str, str] = pydantic.Field(default_factory=dict)
    measurements: dict[str, float] = pydantic.Field(default_factory=dict)
    note: str | None = None
    runtime: float | None = None

    @pydantic.model_validator(mode='after')
    def check_verdict(self) -> 'CheckReport':
        if self.passed != (self.violation <= self.tolerance):
            raise ValueError(
                f'Check {self.name}: passed={self.passed} contradicts violation '
                f'{self.violation} against tolerance {self.tolerance}'
            )
        return self

    @classmethod
    def measure(
        cls,
        name: str,
        violation: float,
        tolerance: float,
        location: npt.ArrayLike | None = None,
        **extra: t.Any,
    ) -> 'CheckReport':
        where = None if location is None else [float(v) for v in np.ravel(location)]
        report = cls(
            name=name,
            passed=bool(violation <= tolerance),
            violation=float(violation),
            tolerance=float(tolerance),
            location=where,
            **extra,
        )
        telemetry.record_check(name, passed=report.passed)
        log = _logger.info if report.passed else _logger.warning
        log(
            'Check %s: %s (violation %.3e, tolerance %.1e)',
            name,
            report.verdict,
            violation,
            tolerance,
        )
        return report

    @property
    def verdict(self) -> str:
        return 'pass' if self.passed else 'fail'


def discrete_mean_curvature(
    mesh: TriMesh, reference: BallPoint = ORIGIN, quadrature_order: int = DEFAULT_ORDER
) -> np.ndarray:
    """Per-vertex mean curvature read off the hyperbolic area and volume gradients.

    A mesh that is critical for the discrete ``I_H`` reports ``H``. Boundary
    vertices and flat stars are NaN.
    """
    return vertex_mean_curvature(mesh, reference, quadrature_order)


def check_containment(
    mesh: TriMesh,
    curve: IdealCurve,
    H: float,
    sample_count: int = 64,
    tol: float = CONTACT_TOLERANCE,
    hull: ShiftedHullSampler | None = None,
) -> CheckReport:
    """Every vertex inside the sampled ``CH_H`` of the curve, up to ``tol``."""
    hull = hull or supporting_halfspaces(curve, H, sample_count)
    violations = hull.violations(mesh.vertices)
    worst = int(np.argmax(violations))
    return CheckReport.measure(
        'containment',
        max(float(violations[worst]), 0.0),
        tol,
        mesh.vertices[worst],
        provenance={'curve': curve.name, 'H': f'{H}', 'halfspaces': f'{len(hull.halfspaces)}'},
    )


def barrier_family(
    curve: IdealCurve, direction: npt.ArrayLike, H: float, steps: int = 48, start: float = 0.05
) -> list[ShiftedHalfspace]:
    """Halfspaces excluding growing caps about ``direction`` up to the supporting one.

    The caps carry the same orientation rule as the supporting halfspaces of the hull.
    """
    axis = np.asarray(direction, dtype=float)
    axis = axis / np.linalg.norm(axis)
    clearance = float(np.min(np.arccos(np.clip(curve.points @ axis, -1.0, 1.0)))) - 1e-9
    if clearance <= start:
        raise InvalidParameterError(f'Direction {axis} is too close to the curve for a sweep')
    sigma: t.Literal[1, -1] = 1 if side_of(curve, axis[None, :])[0] > 0 else -1
    family = []
    for radius in np.linspace(start, clearance, steps):
        cap = UmbilicCap(circle=RoundCircle.from_axis(axis, float(radius)), H=H, sigma=sigma)
        family.append(ShiftedHalfspace(cap=cap, side=-1))
    return family


def _two_ring(mesh: TriMesh, vertex: int) -> np.ndarray:
    edges = mesh.edges()
    ring = {vertex}
    for _ in range(2):
        touching = np.isin(edges, list(ring)).any(axis=1)
        ring |= set(edges[touching].ravel().tolist())
    return np.array(sorted(ring))


def contact_curvature(mesh: TriMesh, vertex: int, normal: npt.ArrayLike) -> float:
    """Mean curvature of the interior 2-ring around ``vertex``, positive toward ``normal``.

    The patch gradients are summed before the ratio is taken, so a single
    spiking vertex does not dominate the estimate.
    """
    n = np.asarray(normal, dtype=float)
    ring = _two_ring(mesh, vertex)
    ring = ring[~mesh.fixed_mask[ring]]
    if len(ring) == 0:
        return math.nan
    area = float(np.sum(area_gradient(mesh)[ring] @ n))
    volume = abs(float(np.sum(volume_gradient(mesh)[ring] @ n)))
    if volume <= 1e-300:
        return math.nan
    return -area / (2.0 * volume)


def _inward_normal(halfspace: ShiftedHalfspace, point: np.ndarray) -> np.ndarray:
    sphere = halfspace.cap.sphere()
    if sphere.is_plane:
        radial = np.asarray(sphere.normal, dtype=float)
    else:
        radial = point - np.asarray(sphere.center, dtype=float)
        radial = radial / np.linalg.norm(radial)
    step = 1e-7 * radial
    outward = halfspace.violation(point + step) > halfspace.violation(point - step)
    return -radial if outward else radial


def check_maximum_principle(
    mesh: TriMesh,
    family: t.Sequence[ShiftedHalfspace],
    tol: float = CONTACT_TOLERANCE,
    curvature_tol: float = CURVATURE_TOLERANCE,
) -> CheckReport:
    """Sweep the barrier family toward the mesh and inspect the first contact.

    A genuine H-surface can only be first touched along its boundary, so the
    violation is the depth by which interior vertices cross the barrier at the
    moment the boundary is reached (or at the end of the sweep).

    An interior first contact must also bend away from the barrier at least as
    much as the barrier bends toward it. Both curvatures are taken toward the
    inside of the halfspace; a shortfall beyond ``curvature_tol`` counts as
    violation.
    """
    if not family:
        raise InvalidParameterError('Barrier family is empty')
    depths = np.array([halfspace.violation(mesh.vertices) for halfspace in family])
    if np.max(depths[0]) >= -tol:
        raise InvalidParameterError('Mesh is not disjoint from the first barrier of the sweep')
    touching = np.flatnonzero(np.max(depths, axis=1) >= -tol)
    barrier = family[-1].cap
    provenance = {'barrier_H': f'{barrier.H}', 'steps': f'{len(family)}'}
    if len(touching) == 0:
        return CheckReport.measure(
            'maximum_principle', 0.0, tol, provenance=provenance, note='vacuous: no contact'
        )

    first = int(touching[0])
    contact = int(np.argmax(depths[first]))
    boundary = mesh.fixed_mask
    boundary_touch = np.flatnonzero(np.max(depths[:, boundary], axis=1) >= -tol)
    settle = int(boundary_touch[0]) if len(boundary_touch) else len(family) - 1
    interior_depths = np.where(boundary, -np.inf, depths[settle])
    worst = int(np.argmax(interior_depths))
    crossing = max(float(interior_depths[worst]), 0.0)
    measurements = {'crossing_depth': crossing, 'contact_step': float(first)}
    violation, location = crossing, mesh.vertices[worst]

    if boundary[contact]:
        note = f'first contact at boundary vertex {contact} (step {first})'
    else:
        point = mesh.vertices[contact]
        normal = _inward_normal(family[first], point)
        local = contact_curvature(mesh, contact, normal)
        bending = family[first].cap.curvature_toward(point, normal)
        measurements |= {'mesh_curvature': local, 'barrier_curvature': bending}
        shortfall = bending - local - curvature_tol
        if math.isfinite(shortfall) and shortfall > violation:
            violation, location = shortfall, point
        note = (
            f'first contact at interior vertex {contact} (step {first}); '
            f'local H {local:.4f} vs barrier H {bending:.4f}'
        )
    return CheckReport.measure(
        'maximum_principle',
        violation,
        tol,
        location,
        provenance=provenance,
        measurements=measurements,
        note=note,
    )


def _final_disk(
    curve: IdealCurve, H: float, cfg: SolverConfig, radii: t.Sequence[float], K: float
) -> TriMesh:
    stages = run_exhaustion(curve, H, radii, K, cfg)
    last = stages[-1]
    if not last.ok or last.disk is None:
        raise SolverError(
            f'Exhaustion for H={H} failed at r={last.ball.hyperbolic_radius}: {last.error}'
        )
    return last.disk


def _closest_interior(
    source: TriMesh, target: TriMesh, reach: float
) -> tuple[float, int, np.ndarray]:
    interior = source.interior_indices
    near = interior[distance_to_origin(source.vertices[interior]) <= reach]
    interior = near if len(near) else interior
    found = closest_points_on_mesh(target, source.vertices[interior])
    k = int(np.argmin(found.hyperbolic))
    return float(found.hyperbolic[k]), int(interior[k]), found.points[k]


def _faces_toward(source: TriMesh, vertex: int, target_point: np.ndarray) -> bool:
    mean_curvature_vector = -area_gradient(source)[vertex]
    return bool(np.dot(mean_curvature_vector, target_point - source.vertices[vertex]) > 0.0)


def pair_planes(
    curve: IdealCurve,
    H: float,
    cfg: SolverConfig,
    radii: t.Sequence[float] = (2.0, 3.0, 4.0),
    core_radius: float = 1.5,
    tol: float = CONTACT_TOLERANCE,
    surfaces: tuple[TriMesh, TriMesh] | None = None,
) -> tuple[TriMesh, TriMesh, CheckReport]:
    """Solve ``+H`` and ``-H`` planes and check they are disjoint with facing convex sides.

    Distances are measured from interior vertices inside ``B_K``, ``K = core_radius``,
    where the truncated surfaces stand in for the complete planes.

    The violation is ``max(0, 2·tol - d_min)`` when the mean curvature vectors
    face each other and infinite otherwise.
    """
    if not 0.0 < H < 1.0:
        raise InvalidParameterError(f'Pair construction needs 0 < H < 1, got {H}')
    if surfaces is None:
        plus = _final_disk(curve, H, cfg, radii, core_radius)
        minus = _final_disk(curve, -H, cfg, radii, core_radius)
    else:
        plus, minus = surfaces
    forward, vertex_plus, point_on_minus = _closest_interior(plus, minus, core_radius)
    backward, vertex_minus, point_on_plus = _closest_interior(minus, plus, core_radius)
    gap = min(forward, backward)
    facing = _faces_toward(plus, vertex_plus, point_on_minus) and _faces_toward(
        minus, vertex_minus, point_on_plus
    )
    violation = max(0.0, 2.0 * tol - gap) if facing else math.inf
    report = CheckReport.measure(
        'pair_planes',
        violation,
        tol,
        plus.vertices[vertex_plus],
        provenance={'curve': curve.name, 'H': f'{H}'},
        measurements={'min_distance': gap, 'equidistant_oracle': 2.0 * math.atanh(H)},
        note=None if facing else 'mean curvature vectors do not face each other',
    )
    return plus, minus, report


def _signed_distances(surface: TriMesh, points: np.ndarray) -> np.ndarray:
    found = closest_points_on_mesh(surface, points)
    normals = surface.area_vectors()[found.triangles]
    side = np.sign(np.sum((points - found.points) * normals, axis=1))
    return side * found.hyperbolic


def foliation_sweep(
    curve: IdealCurve,
    H_values: t.Sequence[float],
    cfg: SolverConfig,
    radii: t.Sequence[float] = (2.0, 3.0, 4.0),
    core_radius: float = 1.5,
    tol: float = CONTACT_TOLERANCE,
    surfaces: t.Mapping[float, TriMesh] | None = None,
    sample_radius: float | None = None,
) -> CheckReport:
    """Solve each ``H`` and check the surfaces are disjoint and nested in ``H`` order.

    Surface ``i`` must see its two neighbours on opposite sides. The violation is
    the deepest sample on the wrong side, or ``2·tol - d_min`` for touching pairs.
    """
    ordered = sorted(float(h) for h in H_values)
    if any(not -1.0 < h < 1.0 for h in ordered):
        raise InvalidParameterError(f'Mean curvatures must lie in (-1, 1), got {ordered}')
    provenance = {'curve': curve.name, 'H': ','.join(f'{h}' for h in ordered)}
    if len(ordered) < 2:
        return CheckReport.measure(
            'foliation', 0.0, tol, provenance=provenance, note='vacuous: fewer than two surfaces'
        )
    if surfaces is None:
        meshes = [_final_disk(curve, h, cfg, radii, core_radius) for h in ordered]
    else:
        meshes = [surfaces[h] for h in ordered]
    reach = sample_radius if sample_radius is not None else max(radii) - 1.0

    def samples(mesh: TriMesh) -> np.ndarray:
        near = mesh.vertices[distance_to_origin(mesh.vertices) <= reach]
        return near if len(near) else mesh.vertices

    crossing = 0.0
    location: np.ndarray | None = None
    gaps = []
    for i, surface in enumerate(meshes):
        sides = []
        for j in (i - 1, i + 1):
            if 0 <= j < len(meshes):
                signed = _signed_distances(surface, samples(meshes[j]))
                majority = 1.0 if np.sum(signed > 0) >= np.sum(signed < 0) else -1.0
                wrong = signed * majority < 0.0
                if np.any(wrong):
                    depth = float(np.max(np.abs(signed[wrong])))
                    if depth > crossing:
                        crossing = depth
                        location = samples(meshes[j])[wrong][int(np.argmax(np.abs(signed[wrong])))]
                sides.append(majority)
        if len(sides) == 2 and sides[0] == sides[1]:
            crossing = math.inf
            location = surface.vertices[0]
    for first, second in zip(meshes, meshes[1:], strict=False):
        gaps.append(float(np.min(closest_points_on_mesh(first, samples(second)).hyperbolic)))
    violation = max(crossing, max(0.0, 2.0 * tol - min(gaps)))
    measurements = {f'gap_{i}': gap for i, gap in enumerate(gaps)}
    return CheckReport.measure(
        'foliation', violation, tol, location, provenance=provenance, measurements=measurements
    )


def _arclength_frame(planar: np.ndarray) -> tuple[cKDTree, np.ndarray, np.ndarray, float]:
    closed = np.vstack([planar, planar[:1]])
    segments = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(segments)])
    return cKDTree(planar), cumulative[:-1], segments, float(cumulative[-1])


def graph_near_infinity(
    mesh: TriMesh,
    curve: IdealCurve,
    rho: float = 0.25,
    bins: tuple[int, int] = GRAPH_BINS,
    tol: float = 1e-3,
) -> CheckReport:
    """Whether the collar of the mesh near the curve is a single-sheeted graph.

    The ball is rotated so a point of ``D⁻`` far from the curve goes to infinity
    of the upper half-space. Collar triangles (height below ``rho``) are projected
    to (arclength along the curve, height); the violation is the fraction of that
    projected area carried by triangles folded against the majority orientation.
    """
    far = -curve.axis()
    rotation = rotation_between(far, _NORTH)
    curve_uhs = to_upper_half_space(rotation.apply(resample(curve.points, 8 * len(curve))))[:, :2]
    points = to_upper_half_space(rotation.apply(mesh.vertices))
    tree, starts, segments, total = _arclength_frame(curve_uhs)
    _, nearest = tree.query(points[:, :2])
    arclength = starts[nearest]
    height = points[:, 2]

    floor = float(np.max(height[mesh.fixed_mask])) if np.any(mesh.fixed_mask) else 0.0
    collar = np.all(height[mesh.triangles] < rho, axis=1) & np.all(
        height[mesh.triangles] > floor, axis=1
    )
    provenance = {'curve': curve.name, 'rho': f'{rho}', 'bins': f'{bins[0]}x{bins[1]}'}
    if floor >= rho:
        return CheckReport.measure(
            'graph_near_infinity',
            math.inf,
            tol,
            provenance=provenance,
            note=f'inconclusive: mesh boundary height {floor:.3e} above rho',
        )

    faces = mesh.triangles[collar]
    s = arclength[faces]
    # unwrap across the arclength seam
    s = np.where(s - s[:, :1] > total / 2.0, s - total, s)
    s = np.where(s - s[:, :1] < -total / 2.0, s + total, s)
    h = height[faces]
    ds, dh = s[:, 1:] - s[:, :1], h[:, 1:] - h[:, :1]
    signed = 0.5 * (ds[:, 0] * dh[:, 1] - ds[:, 1] * dh[:, 0])

    arc_bins = np.floor(np.mod(s.mean(axis=1), total) / total * bins[0]).astype(int)
    height_edges = np.linspace(floor, rho, bins[1] + 1)
    height_bins = np.clip(np.searchsorted(height_edges, h.mean(axis=1)) - 1, 0, bins[1] - 1)
    occupied = np.zeros(bins, dtype=bool)
    occupied[np.clip(arc_bins, 0, bins[0] - 1), height_bins] = True
    coverage = float(np.mean(np.any(occupied, axis=1)))
    if len(faces) == 0 or coverage < 1.0:
        return CheckReport.measure(
            'graph_near_infinity',
            math.inf,
            tol,
            provenance=provenance,
            measurements={'arclength_coverage': coverage},
            note='inconclusive: collar too coarse for the arclength bins',
        )

    total_area = float(np.sum(np.abs(signed)))
    majority = 1.0 if np.sum(signed) >= 0.0 else -1.0
    folded = signed * majority < 0.0
    violation = float(np.sum(np.abs(signed[folded]))) / total_area
    location = None
    if np.any(folded):
        worst = faces[folded][int(np.argmax(np.abs(signed[folded])))]
        location = mesh.vertices[worst].mean(axis=0)
    return CheckReport.measure(
        'graph_near_infinity',
        violation,
        tol,
        location,
        provenance=provenance,
        measurements={
            'arclength_coverage': coverage,
            'collar_triangles': float(len(faces)),
            'folded_triangles': float(np.sum(folded)),
        },
    )


def _segments_hit_triangles(
    origins: np.ndarray, ends: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray
) -> np.ndarray:
    """Segment against triangle intersection, excluding grazing contacts."""
    direction = ends - origins
    ab, ac = b - a, c - a
    p = np.cross(direction, ac)
    det = np.sum(ab * p, axis=-1)
    valid = np.abs(det) > 1e-18
    inv = np.where(valid, 1.0 / np.where(valid, det, 1.0), 0.0)
    offset = origins - a
    u = np.sum(offset * p, axis=-1) * inv
    q = np.cross(offset, ab)
    v = np.sum(direction * q, axis=-1) * inv
    w = np.sum(ac * q, axis=-1) * inv
    eps = 1e-12
    return valid & (u > eps) & (v > eps) & (u + v < 1 - eps) & (w > eps) & (w < 1 - eps)


def check_embedded(mesh: TriMesh) -> CheckReport:
    """Triangle-triangle intersection test over non-adjacent pairs."""
    corners = mesh.corners()
    centroids = corners.mean(axis=1)
    reach = float(np.max(np.linalg.norm(corners - centroids[:, None, :], axis=-1)))
    pairs = cKDTree(centroids).query_pairs(2.0 * reach, output_type='ndarray')
    if len(pairs):
        left = mesh.triangles[pairs[:, 0]][:, :, None]
        right = mesh.triangles[pairs[:, 1]][:, None, :]
        shared = left == right
        pairs = pairs[~shared.any(axis=(1, 2))]
    hits = np.zeros(len(pairs), dtype=bool)
    for first, second in ((0, 1), (1, 0)):
        edges_of = corners[pairs[:, first]]
        target = corners[pairs[:, second]]
        for i in range(3):
            hits |= _segments_hit_triangles(
                edges_of[:, i], edges_of[:, (i + 1) % 3], target[:, 0], target[:, 1], target[:, 2]
            )
    count = int(np.sum(hits))
    location = centroids[pairs[hits][0, 0]] if count else None
    return CheckReport.measure(
        'embedded',
        float(count),
        0.0,
        location,
        measurements={'candidate_pairs': float(len(pairs))},
    )


def mirror_symmetry(
    first: TriMesh, second: TriMesh, normal: npt.ArrayLike, tol: float = 1e-6
) -> CheckReport:
    """Reflect ``second`` in the plane through ``O`` with this normal and compare with ``first``.

    Vertex-wise when the meshes share connectivity, otherwise by Hausdorff distance.
    """
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    mirrored = second.vertices - 2.0 * (second.vertices @ n)[:, None] * n[None, :]
    if first.vertex_count == second.vertex_count:
        gaps = np.linalg.norm(mirrored - first.vertices, axis=1)
        mode = 'vertexwise'
    else:
        gaps = closest_points_on_mesh(first, mirrored).euclidean
        mode = 'hausdorff'
    worst = int(np.argmax(gaps))
    return CheckReport.measure(
        'mirror_symmetry',
        float(gaps[worst]),
        tol,
        first.vertices[worst] if mode == 'vertexwise' else mirrored[worst],
        note=mode,
    )
