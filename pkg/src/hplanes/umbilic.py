"""Exact H-planes over round circles, shifted halfspaces and sampled shifted hulls.

Every H-plane asymptotic to a round circle is an equidistant surface of the
totally geodesic plane over that circle. In the ball model it is a piece of a
Euclidean sphere (or a plane) meeting the ideal sphere at angle ``arccos|H|``.

Sign conventions
----------------

``sd₀(p)`` is the signed distance from ``p`` to the geodesic plane over the
circle, positive toward the axis cap ``Δ⁺``. A cap ``(α, H, σ)`` declares
``Δ^σ`` to be its ``D⁺`` side and sits at ``sd₀ = δ = -σ·artanh(H)``:

======  =====  ===========================  ==============================
H       σ      cap displaced toward         mean curvature vector toward
======  =====  ===========================  ==============================
H > 0   +1     Δ⁻                           Δ⁺ (its D⁺)
H > 0   -1     Δ⁺                           Δ⁻ (its D⁺)
H < 0   +1     Δ⁺                           Δ⁻
H < 0   -1     Δ⁻                           Δ⁺
======  =====  ===========================  ==============================

``(H, σ)`` and ``(-H, -σ)`` describe the same point set with opposite
orientation. ``signed_distance_to_cap`` is positive on the ``D⁻`` side.
"""

import functools
import logging
import math
import typing as t

import numpy as np
import numpy.typing as npt
import pydantic

from scipy.optimize import brentq
from scipy.spatial import QhullError, SphericalVoronoi
from scipy.stats import qmc

from hplanes.curves import (
    IdealCurve,
    RoundCircle,
    orthonormal_frame,
    polyline_angular_distance,
    side_of,
)
from hplanes.hyperbolic import InvalidParameterError, geodesic_ball
from hplanes.mesh.generators import polar_disk
from hplanes.mesh.model import TriMesh

_logger = logging.getLogger(__name__)

_TANGENCY_MARGIN = 1e-9
_MIN_RADIUS = 1e-6


class DegenerateHullError(ValueError):
    pass


def _check_curvature(H: float) -> None:
    if not -1.0 < H < 1.0:
        raise InvalidParameterError(f'Mean curvature H={H} must lie in the open interval (-1, 1)')


def geodesic_plane_distance(points: npt.ArrayLike, circle: RoundCircle) -> t.Any:
    """Signed distance to the geodesic plane over ``circle``, positive toward ``Δ⁺``."""
    x = np.asarray(points, dtype=float)
    axis = circle.axis_array
    cos_psi = math.cos(circle.angular_radius)
    sin_psi = math.sin(circle.angular_radius)
    squared = np.sum(x * x, axis=-1)
    numerator = 2.0 * (x @ axis) - cos_psi * (1.0 + squared)
    result = np.arcsinh(numerator / (sin_psi * (1.0 - squared)))
    if np.ndim(result) == 0:
        return float(result)
    return result


def axis_point_at(circle: RoundCircle, offset: float) -> np.ndarray:
    """Point of the circle's axis diameter at signed plane distance ``offset``."""
    psi = circle.angular_radius
    k = math.sin(psi) * math.sinh(offset)
    height = (math.cos(psi) + k) / (1.0 + math.hypot(math.sin(psi), k))
    return height * circle.axis_array


class SphereRealisation(pydantic.BaseModel):
    """Euclidean sphere ``|x - center| = radius`` or plane ``x·normal = offset``."""

    model_config = pydantic.ConfigDict(frozen=True)

    center: tuple[float, float, float] | None = None
    radius: float | None = None
    normal: tuple[float, float, float] | None = None
    offset: float | None = None

    @property
    def is_plane(self) -> bool:
        return self.radius is None


class UmbilicCap(pydantic.BaseModel):
    """The H-plane asymptotic to a round circle, oriented by ``sigma``."""

    model_config = pydantic.ConfigDict(frozen=True)

    circle: RoundCircle
    H: float
    sigma: t.Literal[1, -1] = 1

    @pydantic.model_validator(mode='after')
    def check_curvature(self) -> 'UmbilicCap':
        _check_curvature(self.H)
        return self

    @property
    def plane_offset(self) -> float:
        """Signed distance ``δ`` of the cap from the geodesic plane over its circle."""
        return -self.sigma * math.atanh(self.H)

    @property
    def intersection_angle(self) -> float:
        """Interior angle with the ideal sphere along the circle."""
        return math.acos(abs(self.H))

    @property
    def _k(self) -> float:
        return math.sin(self.circle.angular_radius) * math.sinh(self.plane_offset)

    @property
    def apex(self) -> np.ndarray:
        return axis_point_at(self.circle, self.plane_offset)

    @property
    def curvature(self) -> float:
        """Signed Euclidean curvature of the profile, positive when bending toward +axis."""
        psi = self.circle.angular_radius
        return (math.cos(psi) - self._k) / math.hypot(math.sin(psi), self._k)

    def sphere(self) -> SphereRealisation:
        psi = self.circle.angular_radius
        axis = self.circle.axis_array
        denominator = math.cos(psi) - self._k
        if abs(denominator) < 1e-14:
            return SphereRealisation(
                normal=(float(axis[0]), float(axis[1]), float(axis[2])), offset=math.cos(psi)
            )
        center = axis / denominator
        radius = math.hypot(math.sin(psi), self._k) / abs(denominator)
        return SphereRealisation(
            center=(float(center[0]), float(center[1]), float(center[2])), radius=radius
        )

    def points(self, arclength: npt.ArrayLike, azimuth: npt.ArrayLike) -> np.ndarray:
        """Cap points at Euclidean arclength ``s`` from the apex along azimuth ``φ``."""
        s = np.asarray(arclength, dtype=float)
        phi = np.asarray(azimuth, dtype=float)
        axis = self.circle.axis_array
        u, w = orthonormal_frame(axis)
        kappa = self.curvature
        along = s * np.sinc(kappa * s / math.pi)
        lift = s * np.sin(kappa * s / 2.0) * np.sinc(kappa * s / (2.0 * math.pi))
        direction = np.cos(phi)[..., None] * u + np.sin(phi)[..., None] * w
        return self.apex + along[..., None] * direction + lift[..., None] * axis

    def truncation_arclength(self, euclidean_radius: float) -> float:
        """Arclength from the apex at which the cap leaves the ball of that radius."""
        apex_norm = float(np.linalg.norm(self.apex))
        if apex_norm >= euclidean_radius:
            raise InvalidParameterError(
                f'Cap apex at |x|={apex_norm:.6f} lies outside the ball of radius '
                f'{euclidean_radius:.6f}'
            )

        def excess(s: float) -> float:
            return float(np.linalg.norm(self.points(s, 0.0))) - euclidean_radius

        kappa = abs(self.curvature)
        upper = math.pi / kappa * (1.0 - 1e-12) if kappa > 1e-12 else 4.0
        high = min(1.0, upper)
        while excess(high) < 0.0 and high < upper:
            high = min(2.0 * high, upper)
        return float(brentq(excess, 0.0, high, xtol=1e-15))

    def curvature_toward(self, point: npt.ArrayLike, normal: npt.ArrayLike) -> float:
        """Hyperbolic mean curvature at ``point``, positive when bending toward ``normal``."""
        if self.H == 0.0:
            return 0.0
        n = np.asarray(normal, dtype=float)
        sphere = self.sphere()
        if sphere.is_plane:
            # the plane x·m = d bends toward m with curvature -d
            assert sphere.normal is not None and sphere.offset is not None
            bend = -math.copysign(1.0, sphere.offset) * np.sign(np.dot(n, sphere.normal))
        else:
            assert sphere.center is not None and sphere.radius is not None
            center = np.asarray(sphere.center)
            # |x - c| = R bends toward c with curvature (1 + R² - |c|²) / 2R
            toward_center = 1.0 + sphere.radius**2 - float(center @ center)
            offset = center - np.asarray(point, dtype=float)
            bend = math.copysign(1.0, toward_center) * np.sign(np.dot(n, offset))
        return float(abs(self.H) * bend)

    def to_record(self) -> dict[str, t.Any]:
        return {
            'axis': [float(value) for value in self.circle.axis_array],
            'angular_radius': self.circle.angular_radius,
            'H': self.H,
            'sigma': self.sigma,
            'plane_offset': self.plane_offset,
        }


def umbilic_cap(circle: RoundCircle, H: float, sigma: t.Literal[1, -1] = 1) -> UmbilicCap:
    _check_curvature(H)
    return UmbilicCap(circle=circle, H=H, sigma=sigma)


def round_curve_cap(curve: IdealCurve, H: float, tol: float = 1e-6) -> UmbilicCap:
    """The exact H-plane asymptotic to a curve sampled from one round circle."""
    axis = curve.axis()
    angles = np.arccos(np.clip(curve.points @ axis, -1.0, 1.0))
    if float(np.ptp(angles)) > tol:
        raise InvalidParameterError(
            f'Curve {curve.name} is not a round circle (polar spread {np.ptp(angles):.3e})'
        )
    # axis() lies in D⁺, so the axis cap is the curve's D⁺ side
    return umbilic_cap(RoundCircle.from_axis(axis, float(np.mean(angles))), H, sigma=1)


def signed_distance_to_cap(points: npt.ArrayLike, cap: UmbilicCap) -> t.Any:
    """Hyperbolic distance to the cap, positive on its ``D⁻`` side."""
    plane = geodesic_plane_distance(points, cap.circle)
    return cap.sigma * (cap.plane_offset - plane)


class ShiftedHalfspace(pydantic.BaseModel):
    """Closed region of the ball on one side of an umbilic cap.

    ``side=+1`` is the region whose ideal boundary is the axis cap ``Δ⁺``.
    """

    model_config = pydantic.ConfigDict(frozen=True)

    cap: UmbilicCap
    side: t.Literal[1, -1]

    def violation(self, points: npt.ArrayLike) -> t.Any:
        """Hyperbolic distance outside the halfspace, negative inside."""
        plane = geodesic_plane_distance(points, self.cap.circle)
        return self.side * (self.cap.plane_offset - plane)

    def to_record(self) -> dict[str, t.Any]:
        return {**self.cap.to_record(), 'side': self.side}


def halfspace_contains(
    points: npt.ArrayLike, halfspace: ShiftedHalfspace, tol: float = 0.0
) -> t.Any:
    result = np.asarray(halfspace.violation(points)) <= tol
    if result.ndim == 0:
        return bool(result)
    return result


class ShiftedHullSampler(pydantic.BaseModel):
    """Finite intersection of supporting H-shifted halfspaces of a curve."""

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    curve: IdealCurve
    H: float
    halfspaces: tuple[ShiftedHalfspace, ...]
    sample_count: int
    medial_count: int = 0

    @pydantic.model_validator(mode='after')
    def check_supporting(self) -> 'ShiftedHullSampler':
        check_supporting(self.curve, self.halfspaces)
        return self

    @functools.cached_property
    def _arrays(self) -> tuple[np.ndarray, ...]:
        axes = np.array([hs.cap.circle.axis_array for hs in self.halfspaces])
        radii = np.array([hs.cap.circle.angular_radius for hs in self.halfspaces])
        offsets = np.array([hs.cap.plane_offset for hs in self.halfspaces])
        sides = np.array([hs.side for hs in self.halfspaces], dtype=float)
        return axes, np.cos(radii), np.sin(radii), offsets, sides

    def violations(self, points: npt.ArrayLike) -> np.ndarray:
        """Largest halfspace violation per point; ``<= 0`` means inside."""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        axes, cos_psi, sin_psi, offsets, sides = self._arrays
        squared = np.sum(x * x, axis=-1)[:, None]
        numerator = 2.0 * (x @ axes.T) - cos_psi * (1.0 + squared)
        plane = np.arcsinh(numerator / (sin_psi * (1.0 - squared)))
        return np.max(sides * (offsets - plane), axis=1)

    def to_record(self) -> dict[str, t.Any]:
        return {
            'curve': self.curve.name,
            'H': self.H,
            'sample_count': self.sample_count,
            'medial_count': self.medial_count,
            'halfspaces': [hs.to_record() for hs in self.halfspaces],
        }


def check_supporting(curve: IdealCurve, halfspaces: t.Iterable[ShiftedHalfspace]) -> None:
    """Raise unless every halfspace's ideal side contains all curve samples."""
    for index, halfspace in enumerate(halfspaces):
        circle = halfspace.cap.circle
        in_axis_cap = circle.in_axis_cap(curve.points)
        wanted = in_axis_cap if halfspace.side == 1 else ~in_axis_cap
        if not np.all(wanted):
            raise DegenerateHullError(
                f'Halfspace {index} is not supporting: {int(np.sum(~wanted))} samples outside'
            )


def candidate_directions(curve: IdealCurve, count: int) -> np.ndarray:
    """Nested candidate centres: the curve's two poles, then a Halton sequence."""
    axis = curve.axis()
    halton = qmc.Halton(d=2, scramble=False).random(max(count - 2, 0) + 1)[1:]
    z = 1.0 - 2.0 * halton[:, 0]
    phi = 2.0 * math.pi * halton[:, 1]
    ring = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    spread = np.column_stack([ring * np.cos(phi), ring * np.sin(phi), z])
    return np.vstack([axis, -axis, spread])[:count]


def medial_directions(curve: IdealCurve) -> np.ndarray:
    """Centres of empty circles through three curve samples, largest circle first.

    These are the spherical Voronoi vertices of the samples; their caps touch the
    curve in two or more places, so they reach into bays that single-contact
    caps around scattered centres miss. Coplanar samples have none.
    """
    try:
        vertices = SphericalVoronoi(curve.points).vertices
    except (QhullError, ValueError):
        return np.empty((0, 3))
    clearance = polyline_angular_distance(vertices, curve.points)
    return vertices[np.argsort(-clearance, kind='stable')]


def _halfspace_around(
    curve: IdealCurve, H: float, direction: np.ndarray, radius: float, excluded_side: int
) -> ShiftedHalfspace:
    circle = RoundCircle.from_axis(direction, radius)
    sigma: t.Literal[1, -1] = 1 if excluded_side > 0 else -1
    return ShiftedHalfspace(cap=UmbilicCap(circle=circle, H=H, sigma=sigma), side=-1)


def _medial_halfspaces(curve: IdealCurve, H: float, count: int) -> list[ShiftedHalfspace]:
    if count == 0:
        return []
    directions = medial_directions(curve)
    if len(directions) == 0:
        return []
    clearance = polyline_angular_distance(directions, curve.points) - _TANGENCY_MARGIN
    sides = side_of(curve, directions)
    chosen: list[np.ndarray] = []
    halfspaces: list[ShiftedHalfspace] = []
    for direction, radius, excluded_side in zip(directions, clearance, sides, strict=True):
        if not _MIN_RADIUS < radius < math.pi - _MIN_RADIUS:
            continue
        # neighbouring Voronoi vertices along one medial branch carry nearly the same cap
        if chosen and np.max(np.asarray(chosen) @ direction) > math.cos(0.5 * radius):
            continue
        chosen.append(direction)
        halfspaces.append(_halfspace_around(curve, H, direction, float(radius), excluded_side))
        if len(halfspaces) == count:
            break
    return halfspaces


def supporting_halfspaces(
    curve: IdealCurve,
    H: float,
    sample_count: int = 64,
    max_candidates: int | None = None,
    medial_count: int | None = None,
) -> ShiftedHullSampler:
    """Sample supporting H-shifted halfspaces of ``curve``.

    Each candidate direction carries the largest cap around it that misses the
    curve polyline. The H-cap over that circle is oriented like the curve: the
    excluded cap plays ``D⁺`` when it lies in the curve's ``D⁺`` and ``D⁻`` otherwise.
    Candidates are taken in a fixed order, so a larger ``sample_count`` only adds
    halfspaces.

    Up to ``medial_count`` (default ``sample_count // 2``) caps centred on
    :func:`medial_directions` follow the ``sample_count`` directional ones.
    """
    _check_curvature(H)
    if sample_count < 8:
        raise InvalidParameterError(f'At least 8 supporting halfspaces needed, got {sample_count}')
    limit = max_candidates or 32 * sample_count
    directions = candidate_directions(curve, limit)
    clearance = polyline_angular_distance(directions, curve.points) - _TANGENCY_MARGIN
    sides = side_of(curve, directions)

    halfspaces: list[ShiftedHalfspace] = []
    for direction, radius, excluded_side in zip(directions, clearance, sides, strict=True):
        if not _MIN_RADIUS < radius < math.pi - _MIN_RADIUS:
            continue
        halfspaces.append(_halfspace_around(curve, H, direction, float(radius), excluded_side))
        if len(halfspaces) == sample_count:
            break

    if not halfspaces:
        raise DegenerateHullError(f'No supporting circle found for curve {curve.name}')
    if len(halfspaces) < sample_count:
        _logger.warning(
            'Only %d of %d supporting halfspaces found for %s',
            len(halfspaces),
            sample_count,
            curve.name,
        )
    wanted = sample_count // 2 if medial_count is None else medial_count
    medial = _medial_halfspaces(curve, H, wanted)
    _logger.debug(
        'Sampled %d directional and %d medial supporting halfspaces for %s',
        len(halfspaces),
        len(medial),
        curve.name,
    )
    halfspaces += medial
    check_supporting(curve, halfspaces)
    return ShiftedHullSampler(
        curve=curve,
        H=H,
        halfspaces=tuple(halfspaces),
        sample_count=sample_count,
        medial_count=len(medial),
    )


def hull_contains(points: npt.ArrayLike, hull: ShiftedHullSampler, tol: float = 1e-3) -> t.Any:
    result = hull.violations(points) <= tol
    if np.ndim(points) == 1:
        return bool(result[0])
    return result


def cap_mesh(cap: UmbilicCap, r: float, rings: int = 24) -> TriMesh:
    """The cap truncated at the geodesic sphere of radius ``r`` as a disk mesh.

    Triangles are oriented with normals toward the cap's ``D⁺`` side, which makes
    the mesh a critical point of ``I_H`` for the cap's own ``H``.
    """
    ball = geodesic_ball(r)
    reach = cap.truncation_arclength(ball.euclidean_radius)

    def embed(fraction: np.ndarray, azimuth: np.ndarray) -> np.ndarray:
        return cap.points(fraction * reach, azimuth)

    mesh = polar_disk(embed, rings)
    if cap.sigma == -1:
        mesh = mesh.flipped()
    return mesh
