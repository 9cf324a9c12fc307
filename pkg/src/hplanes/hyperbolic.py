"""Exact geometry of the Poincaré ball model of hyperbolic 3-space.

All operations accept either the pydantic point types or plain ``(..., 3)``
arrays and broadcast over leading axes. The model origin ``O`` is the centre
of every geodesic ball used elsewhere in the package.

Upper half-space convention: the Cayley map sends the ideal point ``(0, 0, 1)``
to the point at infinity and ``O`` to ``(0, 0, 1)``.
"""

import logging
import math
import typing as t

import numpy as np
import numpy.typing as npt
import pydantic

from scipy.spatial.transform import Rotation

_logger = logging.getLogger(__name__)

EPS_IDEAL = 1e-12
_NORTH = np.array([0.0, 0.0, 1.0])


class InvalidParameterError(ValueError):
    pass


class IdealPointError(ValueError):
    pass


def check_inside_ball(points: npt.ArrayLike, eps_ideal: float = EPS_IDEAL) -> None:
    """Reject coordinates at or beyond ``1 - eps_ideal`` from the origin."""
    norms = np.linalg.norm(np.asarray(points, dtype=float), axis=-1)
    worst = float(np.max(norms)) if norms.size else 0.0
    if worst >= 1.0 - eps_ideal:
        raise IdealPointError(f'Point norm {worst} is not below 1 - {eps_ideal}')


class BallPoint(pydantic.BaseModel):
    """A point of the open unit ball."""

    model_config = pydantic.ConfigDict(frozen=True)

    x: float
    y: float
    z: float

    @pydantic.model_validator(mode='after')
    def check_inside_ball(self, info: pydantic.ValidationInfo) -> 'BallPoint':
        eps_ideal = EPS_IDEAL
        if info.context and 'eps_ideal' in info.context:
            eps_ideal = float(info.context['eps_ideal'])
        check_inside_ball(np.array([self.x, self.y, self.z]), eps_ideal)
        return self

    @classmethod
    def from_array(cls, coords: npt.ArrayLike, eps_ideal: float = EPS_IDEAL) -> 'BallPoint':
        vector = np.asarray(coords, dtype=float).reshape(3)
        check_inside_ball(vector, eps_ideal)
        x, y, z = (float(value) for value in vector)
        return cls.model_validate({'x': x, 'y': y, 'z': z}, context={'eps_ideal': eps_ideal})

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


ORIGIN = BallPoint(x=0.0, y=0.0, z=0.0)


class IdealPoint(pydantic.BaseModel):
    """A point of the sphere at infinity."""

    model_config = pydantic.ConfigDict(frozen=True)

    x: float
    y: float
    z: float

    @pydantic.model_validator(mode='after')
    def check_unit_norm(self) -> 'IdealPoint':
        norm = math.sqrt(self.x**2 + self.y**2 + self.z**2)
        if abs(norm - 1.0) > EPS_IDEAL:
            raise IdealPointError(f'Ideal point norm {norm} differs from 1')
        return self

    @classmethod
    def from_array(cls, coords: npt.ArrayLike) -> 'IdealPoint':
        """Build an ideal point, normalising the direction first."""
        vector = np.asarray(coords, dtype=float).reshape(3)
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            raise IdealPointError('Zero vector has no direction on the ideal sphere')
        x, y, z = (float(value) for value in vector / norm)
        return cls(x=x, y=y, z=z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


class GeodesicBall(pydantic.BaseModel):
    """Closed geodesic ball centred at the model origin."""

    model_config = pydantic.ConfigDict(frozen=True)

    hyperbolic_radius: pydantic.PositiveFloat
    euclidean_radius: float

    @pydantic.model_validator(mode='after')
    def check_radii(self) -> 'GeodesicBall':
        if not 0.0 < self.euclidean_radius < 1.0:
            raise InvalidParameterError(
                f'Euclidean radius {self.euclidean_radius} outside (0, 1)'
            )
        expected = math.tanh(self.hyperbolic_radius / 2.0)
        if abs(expected - self.euclidean_radius) > 1e-12:
            raise InvalidParameterError(
                f'Euclidean radius {self.euclidean_radius} is not tanh(r/2) = {expected}'
            )
        return self

    @property
    def center(self) -> BallPoint:
        return ORIGIN

    @property
    def boundary_mean_curvature(self) -> float:
        """Mean curvature of the boundary sphere toward the interior, coth r."""
        return 1.0 / math.tanh(self.hyperbolic_radius)

    @property
    def boundary_area(self) -> float:
        return 4.0 * math.pi * math.sinh(self.hyperbolic_radius) ** 2

    @property
    def volume(self) -> float:
        r = self.hyperbolic_radius
        return math.pi * (math.sinh(2.0 * r) - 2.0 * r)

    def contains(self, points: npt.ArrayLike, slack: float = 0.0) -> np.ndarray:
        coords = _coords(points)
        return np.linalg.norm(coords, axis=-1) <= self.euclidean_radius + slack


class UHPoint(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    u: float
    v: float
    t: pydantic.PositiveFloat

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.t])


type PointLike = BallPoint | npt.ArrayLike


def _coords(point: t.Any) -> np.ndarray:
    if isinstance(point, BallPoint | IdealPoint | UHPoint):
        return point.as_array()
    return np.asarray(point, dtype=float)


def distance(p: PointLike, q: PointLike) -> t.Any:
    """Hyperbolic distance between ball points.

    Uses ``2 asinh(sqrt(s))`` with ``s = |p-q|² / ((1-|p|²)(1-|q|²))``, which equals
    ``arccosh(1 + 2s)`` but keeps full precision for nearby points.
    """
    a = _coords(p)
    b = _coords(q)
    diff = np.sum((a - b) ** 2, axis=-1)
    denom = (1.0 - np.sum(a * a, axis=-1)) * (1.0 - np.sum(b * b, axis=-1))
    result = 2.0 * np.arcsinh(np.sqrt(diff / denom))
    if np.ndim(result) == 0:
        return float(result)
    return result


def distance_to_origin(points: PointLike) -> t.Any:
    norms = np.linalg.norm(_coords(points), axis=-1)
    result = 2.0 * np.arctanh(norms)
    if np.ndim(result) == 0:
        return float(result)
    return result


def conformal_factor(p: PointLike) -> t.Any:
    """Ball-model metric scale ``λ(p) = 2 / (1 - |p|²)``."""
    a = _coords(p)
    result = 2.0 / (1.0 - np.sum(a * a, axis=-1))
    if np.ndim(result) == 0:
        return float(result)
    return result


def geodesic_ball(r: float) -> GeodesicBall:
    if not r > 0.0 or not math.isfinite(r):
        raise InvalidParameterError(f'Geodesic ball radius must be positive, got {r}')
    return GeodesicBall(hyperbolic_radius=r, euclidean_radius=math.tanh(r / 2.0))


def hyperbolic_radius_of(euclidean_radius: float) -> float:
    if not 0.0 <= euclidean_radius < 1.0:
        raise InvalidParameterError(f'Euclidean radius {euclidean_radius} outside [0, 1)')
    return 2.0 * math.atanh(euclidean_radius)


def to_upper_half_space(p: PointLike) -> t.Any:
    """Cayley map into the upper half-space model.

    Returns a ``UHPoint`` for a single ``BallPoint``, otherwise an array whose
    last axis holds ``(u, v, t)``.
    """
    a = _coords(p)
    offset = a - _NORTH
    q = np.sum(offset * offset, axis=-1)
    u = 2.0 * a[..., 0] / q
    v = 2.0 * a[..., 1] / q
    height = (1.0 - np.sum(a * a, axis=-1)) / q
    image = np.stack([u, v, height], axis=-1)
    if isinstance(p, BallPoint):
        return UHPoint(u=float(image[0]), v=float(image[1]), t=float(image[2]))
    return image


def from_upper_half_space(w: UHPoint | npt.ArrayLike) -> t.Any:
    """Inverse of :func:`to_upper_half_space`."""
    b = _coords(w)
    reflected = b * np.array([1.0, 1.0, -1.0])
    offset = reflected - _NORTH
    q = np.sum(offset * offset, axis=-1)
    image = _NORTH + 2.0 * offset / q[..., None]
    if isinstance(w, UHPoint):
        return BallPoint.from_array(image)
    return image


def upper_half_space_distance(a: UHPoint | npt.ArrayLike, b: UHPoint | npt.ArrayLike) -> t.Any:
    x = _coords(a)
    y = _coords(b)
    s = np.sum((x - y) ** 2, axis=-1) / (4.0 * x[..., 2] * y[..., 2])
    result = 2.0 * np.arcsinh(np.sqrt(s))
    if np.ndim(result) == 0:
        return float(result)
    return result


def random_rotation(rng: np.random.Generator) -> Rotation:
    return Rotation.random(None, rng)


def rotate(points: npt.ArrayLike, rotation: Rotation) -> np.ndarray:
    coords = np.asarray(points, dtype=float)
    return rotation.apply(coords.reshape(-1, 3)).reshape(coords.shape)


def mobius_translation(points: npt.ArrayLike, shift: npt.ArrayLike) -> np.ndarray:
    """Hyperbolic translation sending ``O`` to ``shift``; ``-shift`` undoes it.

    Acts on ideal points too, mapping the unit sphere to itself.
    """
    x = np.asarray(points, dtype=float)
    a = np.asarray(shift, dtype=float)
    if np.linalg.norm(a) >= 1.0:
        raise InvalidParameterError(f'Translation target {a} must lie inside the ball')
    ax = np.sum(x * a, axis=-1)[..., None]
    xx = np.sum(x * x, axis=-1)[..., None]
    aa = float(np.dot(a, a))
    numerator = (1.0 + 2.0 * ax + xx) * a + (1.0 - aa) * x
    return numerator / (1.0 + 2.0 * ax + aa * xx)
