"""Closed curves on the sphere at infinity.

An ``IdealCurve`` is a closed spherical polyline. Its orientation flag names the
sides: ``D⁺`` is the region on the left of the traversal seen from outside the
sphere, and a flag of ``-1`` swaps the labels.
"""

import collections.abc as c
import enum
import logging
import math
import typing as t

import numpy as np
import numpy.typing as npt
import pydantic

from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from hplanes.hyperbolic import IdealPoint, mobius_translation

_logger = logging.getLogger(__name__)

MIN_SAMPLES = 16
MAX_ANGULAR_GAP = math.pi / 8
_CIRCLE_MARGIN = 1e-6
_POLE_CANDIDATES = np.array(
    [
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)


class CurveError(ValueError):
    pass


class NonSimpleCurveError(CurveError):
    pass


class CurveKind(enum.StrEnum):
    CIRCLE = 'circle'
    ELLIPSE = 'ellipse'
    FOURIER = 'fourier'


def orthonormal_frame(axis: npt.ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    """Two unit vectors completing ``axis`` to a right-handed frame."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = helper - np.dot(helper, a) * a
    u /= np.linalg.norm(u)
    w = np.cross(a, u)
    return u, w


def rotation_between(source: npt.ArrayLike, target: npt.ArrayLike) -> Rotation:
    """Smallest rotation taking the direction ``source`` to ``target``."""
    a = np.asarray(source, dtype=float)
    b = np.asarray(target, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    cross = np.cross(a, b)
    sin_angle = float(np.linalg.norm(cross))
    cos_angle = float(np.clip(np.dot(a, b), -1.0, 1.0))
    if sin_angle < 1e-15:
        if cos_angle > 0.0:
            return Rotation.identity()
        perpendicular, _ = orthonormal_frame(a)
        return Rotation.from_rotvec(math.pi * perpendicular)
    angle = math.atan2(sin_angle, cos_angle)
    return Rotation.from_rotvec(cross / sin_angle * angle)


def angle_between(a: npt.ArrayLike, b: npt.ArrayLike) -> t.Any:
    """Angle between unit vectors, stable for nearly (anti)parallel inputs."""
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    cross = np.linalg.norm(np.cross(x, y), axis=-1)
    dot = np.sum(x * y, axis=-1)
    result = np.arctan2(cross, dot)
    if np.ndim(result) == 0:
        return float(result)
    return result


class RoundCircle(pydantic.BaseModel):
    """Round circle ``{v : angle(v, axis) = angular_radius}`` on the ideal sphere.

    The open cap around the axis is ``Δ⁺``, its complement ``Δ⁻``.
    """

    model_config = pydantic.ConfigDict(frozen=True)

    axis: IdealPoint
    angular_radius: float

    @pydantic.model_validator(mode='after')
    def check_radius(self) -> 'RoundCircle':
        if not _CIRCLE_MARGIN < self.angular_radius < math.pi - _CIRCLE_MARGIN:
            raise CurveError(f'Angular radius {self.angular_radius} too close to 0 or pi')
        return self

    @classmethod
    def from_axis(cls, axis: npt.ArrayLike, angular_radius: float) -> 'RoundCircle':
        if not _CIRCLE_MARGIN < angular_radius < math.pi - _CIRCLE_MARGIN:
            raise CurveError(f'Angular radius {angular_radius} too close to 0 or pi')
        return cls(axis=IdealPoint.from_array(axis), angular_radius=float(angular_radius))

    @property
    def axis_array(self) -> np.ndarray:
        return self.axis.as_array()

    def sample(self, n: int) -> np.ndarray:
        u, w = orthonormal_frame(self.axis_array)
        angles = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
        ring = np.cos(angles)[:, None] * u + np.sin(angles)[:, None] * w
        return (
            math.sin(self.angular_radius) * ring
            + math.cos(self.angular_radius) * self.axis_array
        )

    def in_axis_cap(self, directions: npt.ArrayLike) -> np.ndarray:
        return angle_between(directions, self.axis_array) < self.angular_radius


def _max_gap(points: np.ndarray) -> float:
    return float(np.max(angle_between(points, np.roll(points, -1, axis=0))))


def find_crossings(points: np.ndarray) -> list[tuple[int, int]]:
    """Pairs of non-adjacent great-circle arcs of the closed polyline that cross."""
    n = len(points)
    starts = points
    ends = np.roll(points, -1, axis=0)
    normals = np.cross(starts, ends)
    i, j = np.triu_indices(n, k=2)
    # arcs n-1 and 0 share a vertex
    keep = ~((i == 0) & (j == n - 1))
    i = i[keep]
    j = j[keep]

    side_b_start = np.einsum('ij,ij->i', normals[i], starts[j])
    side_b_end = np.einsum('ij,ij->i', normals[i], ends[j])
    side_a_start = np.einsum('ij,ij->i', normals[j], starts[i])
    side_a_end = np.einsum('ij,ij->i', normals[j], ends[i])
    straddle = (side_b_start * side_b_end < 0.0) & (side_a_start * side_a_end < 0.0)
    same_hemisphere = np.einsum('ij,ij->i', starts[i] + ends[i], starts[j] + ends[j]) > 0.0
    hits = np.flatnonzero(straddle & same_hemisphere)
    return [(int(i[k]), int(j[k])) for k in hits]


def validate_curve_points(points: npt.ArrayLike) -> np.ndarray:
    """Return normalised samples, raising ``CurveError`` for invalid polylines."""
    array = np.asarray(points, dtype=float)
    if array.ndim != 2 or array.shape[1] != 3:
        raise CurveError(f'Curve samples must have shape (n, 3), got {array.shape}')
    if len(array) < MIN_SAMPLES:
        raise CurveError(f'Curve needs at least {MIN_SAMPLES} samples, got {len(array)}')
    norms = np.linalg.norm(array, axis=1)
    if np.any(norms == 0.0):
        raise CurveError('Curve contains a zero vector')
    array = array / norms[:, None]
    gap = _max_gap(array)
    if gap > MAX_ANGULAR_GAP:
        raise CurveError(
            f'Consecutive samples {gap:.4f} rad apart, limit is {MAX_ANGULAR_GAP:.4f}'
        )
    crossings = find_crossings(array)
    if crossings:
        raise NonSimpleCurveError(
            f'Curve is not simple: {len(crossings)} crossing arc pairs, first {crossings[0]}'
        )
    array.setflags(write=False)
    return array


class IdealCurve(pydantic.BaseModel):
    """Closed simple curve on the sphere at infinity."""

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: np.ndarray
    orientation: t.Literal[1, -1] = 1
    smooth_index: int = 0
    name: str = 'curve'

    @pydantic.field_validator('points', mode='before')
    @classmethod
    def check_points(cls, value: t.Any) -> np.ndarray:
        return validate_curve_points(value)

    @pydantic.model_validator(mode='after')
    def check_smooth_index(self) -> 'IdealCurve':
        if not 0 <= self.smooth_index < len(self.points):
            raise CurveError(f'Smooth point index {self.smooth_index} out of range')
        return self

    @classmethod
    def from_points(
        cls,
        points: npt.ArrayLike,
        orientation: t.Literal[1, -1] = 1,
        smooth_index: int = 0,
        name: str = 'curve',
    ) -> 'IdealCurve':
        """Build a curve, raising the domain errors instead of a ValidationError."""
        validated = validate_curve_points(points)
        if not 0 <= smooth_index < len(validated):
            raise CurveError(f'Smooth point index {smooth_index} out of range')
        return cls.model_construct(
            points=validated, orientation=orientation, smooth_index=smooth_index, name=name
        )

    def __len__(self) -> int:
        return len(self.points)

    @property
    def max_gap(self) -> float:
        return _max_gap(self.points)

    @property
    def length(self) -> float:
        return float(np.sum(angle_between(self.points, np.roll(self.points, -1, axis=0))))

    def reversed(self) -> 'IdealCurve':
        """Same point set traversed backwards with the same D⁺ region."""
        return IdealCurve.from_points(
            self.points[::-1].copy(),
            orientation=t.cast(t.Literal[1, -1], -self.orientation),
            smooth_index=len(self.points) - 1 - self.smooth_index,
            name=self.name,
        )

    def rotated(self, rotation: Rotation) -> 'IdealCurve':
        return IdealCurve.from_points(
            rotation.apply(self.points),
            orientation=self.orientation,
            smooth_index=self.smooth_index,
            name=self.name,
        )

    def axis(self) -> np.ndarray:
        """Direction around which the curve winds, on its D⁺ side."""
        mean = np.mean(self.points, axis=0)
        if np.linalg.norm(mean) > 1e-3:
            candidate = mean / np.linalg.norm(mean)
        else:
            _, _, vh = np.linalg.svd(self.points, full_matrices=False)
            candidate = vh[-1]
        if side_of(self, candidate[None, :])[0] < 0:
            candidate = -candidate
        return candidate

    def tangent_at(self, index: int) -> np.ndarray:
        n = len(self.points)
        forward = self.points[(index + 1) % n] - self.points[(index - 1) % n]
        base = self.points[index]
        tangent = forward - np.dot(forward, base) * base
        return tangent / np.linalg.norm(tangent)

    def normal_at(self, index: int) -> np.ndarray:
        """Unit tangent vector of the sphere normal to the curve, pointing into D⁺."""
        left = np.cross(self.points[index], self.tangent_at(index))
        return self.orientation * left

    def smooth_point(self) -> np.ndarray:
        return self.points[self.smooth_index]


def _polar_curve(
    polar_angles: np.ndarray, azimuths: np.ndarray, axis: npt.ArrayLike
) -> np.ndarray:
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    u, w = orthonormal_frame(a)
    ring = np.cos(azimuths)[:, None] * u + np.sin(azimuths)[:, None] * w
    return np.sin(polar_angles)[:, None] * ring + np.cos(polar_angles)[:, None] * a


def circle_curve(
    axis: npt.ArrayLike = (0.0, 0.0, 1.0),
    angular_radius: float = math.pi / 2,
    n: int = 256,
) -> IdealCurve:
    azimuths = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    points = _polar_curve(np.full(n, angular_radius), azimuths, axis)
    return IdealCurve.from_points(points, name='circle')


def ellipse_curve(
    semi_axes: tuple[float, float] = (1.75, 1.35),
    n: int = 256,
    axis: npt.ArrayLike = (0.0, 0.0, 1.0),
) -> IdealCurve:
    """Curve whose azimuthal-equidistant image about ``axis`` is an ellipse.

    ``semi_axes`` are polar angles in radians, both strictly below pi.
    """
    a, b = semi_axes
    if not (0.0 < a < math.pi and 0.0 < b < math.pi):
        raise CurveError(f'Ellipse semi-axes {semi_axes} must lie in (0, pi)')
    azimuths = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    polar = a * b / np.sqrt((b * np.cos(azimuths)) ** 2 + (a * np.sin(azimuths)) ** 2)
    return IdealCurve.from_points(_polar_curve(polar, azimuths, axis), name='ellipse')


def fourier_curve(
    coefficients: c.Sequence[float],
    n: int = 256,
    axis: npt.ArrayLike = (0.0, 0.0, 1.0),
    base_radius: float = math.pi / 2,
) -> IdealCurve:
    """Circle whose polar angle is perturbed by ``Σ_j c_j cos((j + 2) t)``.

    Harmonics start at 2 because the first harmonic only tilts the circle.
    """
    azimuths = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    polar = np.full(n, base_radius)
    for j, coefficient in enumerate(coefficients):
        polar += float(coefficient) * np.cos((j + 2) * azimuths)
    if np.any(polar <= _CIRCLE_MARGIN) or np.any(polar >= math.pi - _CIRCLE_MARGIN):
        raise CurveError('Fourier perturbation pushes the curve through a pole')
    return IdealCurve.from_points(_polar_curve(polar, azimuths, axis), name='fourier')


def resample(points: npt.ArrayLike, n: int) -> np.ndarray:
    """Resample a closed spherical polyline at ``n`` points uniform in arclength."""
    array = np.asarray(points, dtype=float)
    closed = np.vstack([array, array[:1]])
    seg = angle_between(closed[:-1], closed[1:])
    cumulative = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, cumulative[-1], n, endpoint=False)
    index = np.clip(np.searchsorted(cumulative, targets, side='right') - 1, 0, len(seg) - 1)
    local = (targets - cumulative[index]) / np.where(seg[index] > 0, seg[index], 1.0)
    start = closed[index]
    end = closed[index + 1]
    omega = seg[index]
    sin_omega = np.sin(omega)
    small = sin_omega < 1e-12
    safe = np.where(small, 1.0, sin_omega)
    w0 = np.where(small, 1.0 - local, np.sin((1.0 - local) * omega) / safe)
    w1 = np.where(small, local, np.sin(local * omega) / safe)
    result = w0[:, None] * start + w1[:, None] * end
    return result / np.linalg.norm(result, axis=1)[:, None]


def _stereographic(points: np.ndarray, pole: np.ndarray) -> np.ndarray:
    """Orientation-preserving stereographic projection from ``pole``."""
    rotation = rotation_between(pole, np.array([0.0, 0.0, -1.0]))
    moved = rotation.apply(points.reshape(-1, 3))
    return moved[:, :2] / (1.0 + moved[:, 2])[:, None]


def _pick_pole(points: np.ndarray, extra: np.ndarray | None = None) -> np.ndarray:
    candidates = _POLE_CANDIDATES if extra is None else np.vstack([_POLE_CANDIDATES, extra])
    tree = cKDTree(points)
    clearance, _ = tree.query(candidates)
    return candidates[int(np.argmax(clearance))]


def winding_numbers(
    curve_points: npt.ArrayLike, queries: npt.ArrayLike, pole: npt.ArrayLike
) -> np.ndarray:
    """Winding numbers of the projected curve around projected queries.

    The projection is taken from ``pole``, which must not lie on the curve.
    """
    curve = np.asarray(curve_points, dtype=float)
    query = np.atleast_2d(np.asarray(queries, dtype=float))
    pole_array = np.asarray(pole, dtype=float)
    planar_curve = _stereographic(curve, pole_array)
    planar_query = _stereographic(query, pole_array)
    offsets = planar_curve[None, :, :] - planar_query[:, None, :]
    following = np.roll(offsets, -1, axis=1)
    cross = offsets[..., 0] * following[..., 1] - offsets[..., 1] * following[..., 0]
    dot = np.sum(offsets * following, axis=-1)
    total = np.sum(np.arctan2(cross, dot), axis=1)
    return np.rint(total / (2.0 * math.pi)).astype(int)


def side_of(curve: IdealCurve, directions: npt.ArrayLike) -> np.ndarray:
    """``+1`` for directions in ``D⁺``, ``-1`` for ``D⁻``."""
    query = np.atleast_2d(np.asarray(directions, dtype=float))
    query = query / np.linalg.norm(query, axis=1)[:, None]
    pole = _pick_pole(curve.points)
    planar = _stereographic(curve.points, pole)
    signed_area = 0.5 * np.sum(
        planar[:, 0] * np.roll(planar[:, 1], -1) - np.roll(planar[:, 0], -1) * planar[:, 1]
    )
    winding = winding_numbers(curve.points, query, pole)
    if signed_area > 0.0:
        left = winding != 0
    else:
        left = winding == 0
    return np.where(left, 1, -1) * curve.orientation


def polyline_angular_distance(
    points: npt.ArrayLike, polyline: npt.ArrayLike, neighbours: int = 6
) -> np.ndarray:
    """Angular distance from each point to a closed polyline of great-circle arcs."""
    query = np.atleast_2d(np.asarray(points, dtype=float))
    query = query / np.linalg.norm(query, axis=1)[:, None]
    nodes = np.asarray(polyline, dtype=float)
    nodes = nodes / np.linalg.norm(nodes, axis=1)[:, None]
    n = len(nodes)
    k = min(neighbours, n)
    _, nearest = cKDTree(nodes).query(query, k=k)
    nearest = np.asarray(nearest).reshape(len(query), k)
    starts_index = np.concatenate([nearest, (nearest - 1) % n], axis=1)

    a = nodes[starts_index]
    b = nodes[(starts_index + 1) % n]
    p = query[:, None, :]
    normal = np.cross(a, b)
    normal_norm = np.linalg.norm(normal, axis=-1, keepdims=True)
    normal = normal / np.where(normal_norm > 0.0, normal_norm, 1.0)
    height = np.sum(p * normal, axis=-1)
    foot = p - height[..., None] * normal
    inside = (np.sum(np.cross(a, foot) * normal, axis=-1) >= 0.0) & (
        np.sum(np.cross(foot, b) * normal, axis=-1) >= 0.0
    )
    to_arc = np.arcsin(np.clip(np.abs(height), 0.0, 1.0))
    to_ends = np.minimum(angle_between(p, a), angle_between(p, b))
    candidate = np.where(inside & (normal_norm[..., 0] > 0.0), to_arc, to_ends)
    return np.min(candidate, axis=1)


def angular_hausdorff(first: npt.ArrayLike, second: npt.ArrayLike) -> float:
    """Hausdorff distance between two closed spherical polylines, in radians."""
    forward = polyline_angular_distance(first, second)
    backward = polyline_angular_distance(second, first)
    return float(max(np.max(forward), np.max(backward)))


def open_hemisphere_contains(curve: IdealCurve) -> bool:
    """Whether the samples fit in an open hemisphere, i.e. O misses the convex hull."""
    mean = np.mean(curve.points, axis=0)
    if np.linalg.norm(mean) < 1e-9:
        return False
    direction = mean / np.linalg.norm(mean)
    return bool(np.all(curve.points @ direction > 0.0))


class CurveNormalization(pydantic.BaseModel):
    """The isometry ``x ↦ R(T_{-c}(x))`` applied by :func:`normalize_curve`."""

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation: Rotation

    def apply(self, points: npt.ArrayLike) -> np.ndarray:
        moved = mobius_translation(points, -np.asarray(self.center))
        return t.cast(np.ndarray, self.rotation.apply(moved))

    def inverse(self, points: npt.ArrayLike) -> np.ndarray:
        return mobius_translation(self.rotation.inv().apply(points), self.center)


def conformal_center(
    points: npt.ArrayLike, tol: float = 1e-6, max_iterations: int = 200
) -> np.ndarray:
    """Ball point whose translation to ``O`` puts the mean of the samples at ``O``."""
    ideal = np.asarray(points, dtype=float)
    center = np.zeros(3)
    mean = np.mean(ideal, axis=0)
    for _ in range(max_iterations):
        mean = np.mean(mobius_translation(ideal, -center), axis=0)
        if np.linalg.norm(mean) < tol:
            return center
        center = mobius_translation(0.5 * mean, center)
    _logger.warning(
        'Conformal centre not reached after %d steps (mean %.3e)',
        max_iterations,
        float(np.linalg.norm(mean)),
    )
    return center


def normalize_curve(curve: IdealCurve) -> tuple[IdealCurve, CurveNormalization]:
    """Move the curve to a standard position; returns the isometry used.

    A curve inside an open hemisphere is first translated so that its conformal
    centre sits at ``O``. The winding axis is then rotated to +z.
    """
    center = np.zeros(3)
    if open_hemisphere_contains(curve):
        center = conformal_center(curve.points)
        moved = mobius_translation(curve.points, -center)
        curve = IdealCurve.from_points(
            moved / np.linalg.norm(moved, axis=1)[:, None],
            orientation=curve.orientation,
            smooth_index=curve.smooth_index,
            name=curve.name,
        )
        _logger.info(
            'Curve %s lies in an open hemisphere; recentred from %s',
            curve.name,
            np.round(center, 6).tolist(),
        )
    rotation = rotation_between(curve.axis(), np.array([0.0, 0.0, 1.0]))
    normalization = CurveNormalization(
        center=(float(center[0]), float(center[1]), float(center[2])), rotation=rotation
    )
    return curve.rotated(rotation), normalization


def build_curve(
    kind: CurveKind,
    sample_count: int = 256,
    *,
    axis: npt.ArrayLike = (0.0, 0.0, 1.0),
    angular_radius: float = math.pi / 2,
    semi_axes: tuple[float, float] = (1.75, 1.35),
    coefficients: c.Sequence[float] = (),
    smooth_index: int = 0,
) -> IdealCurve:
    match kind:
        case CurveKind.CIRCLE:
            curve = circle_curve(axis, angular_radius, sample_count)
        case CurveKind.ELLIPSE:
            curve = ellipse_curve(semi_axes, sample_count, axis)
        case CurveKind.FOURIER:
            curve = fourier_curve(coefficients, sample_count, axis, angular_radius)
    if smooth_index:
        curve = IdealCurve.from_points(
            curve.points, curve.orientation, smooth_index=smooth_index, name=curve.name
        )
    return curve
