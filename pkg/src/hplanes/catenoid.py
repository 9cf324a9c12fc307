"""Rotationally symmetric minimal annuli between two coaxial circles.

A surface of revolution about the z-axis with meridian ``(ρ(s), z(s))`` has
hyperbolic area ``2π ∫ ρ λ² ds`` with ``λ = 2 / (1 - ρ² - z²)``, so its meridian
is a geodesic of the conformal metric ``(ρ λ²)² (dρ² + dz²)``. In Euclidean
arclength with tangent angle ``θ`` this reads ``θ' = ∂_n log(ρ λ²)``.

Profiles start at the neck ``(ρ₀, 0)`` with a vertical tangent and are symmetric
under ``z -> -z``.
"""

import logging
import math

import numpy as np
import pydantic
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from hplanes.hyperbolic import InvalidParameterError

_logger = logging.getLogger(__name__)

_MAX_ARCLENGTH = 4.0
_RTOL = 1e-10
_ATOL = 1e-12
_NO_SOLUTION = 1.0


class CatenoidProfile(pydantic.BaseModel):
    """Upper half of a meridian, from the neck to the requested height."""

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    neck_radius: float
    heights: np.ndarray
    radii: np.ndarray
    reached: bool

    def radius_at(self, height: float) -> float:
        return float(np.interp(abs(height), self.heights, self.radii))

    def points(self, segments: int = 64) -> np.ndarray:
        """Both halves of the surface as ``(rows, segments, 3)``, bottom row first."""
        heights = np.concatenate([-self.heights[:0:-1], self.heights])
        radii = np.concatenate([self.radii[:0:-1], self.radii])
        azimuth = 2.0 * math.pi * np.arange(segments) / segments
        x = radii[:, None] * np.cos(azimuth)[None, :]
        y = radii[:, None] * np.sin(azimuth)[None, :]
        z = np.broadcast_to(heights[:, None], x.shape)
        return np.stack([x, y, z], axis=-1)


def _meridian(s: float, state: np.ndarray) -> list[float]:
    rho, z, theta = state
    scale = 1.0 - rho * rho - z * z
    d_rho = 1.0 / rho + 4.0 * rho / scale
    d_z = 4.0 * z / scale
    return [math.cos(theta), math.sin(theta), -math.sin(theta) * d_rho + math.cos(theta) * d_z]


def catenoid_profile(neck_radius: float, height: float, samples: int = 200) -> CatenoidProfile:
    """Integrate the meridian upward from a neck of Euclidean radius ``neck_radius``.

    Integration stops at ``z = height``, when the meridian turns horizontal or when
    it approaches the ideal sphere; ``reached`` tells whether the height was met.
    """
    if not 0.0 < neck_radius < 1.0:
        raise InvalidParameterError(f'Neck radius {neck_radius} must lie in (0, 1)')
    if height <= 0.0:
        raise InvalidParameterError(f'Height must be positive, got {height}')

    def at_height(s: float, state: np.ndarray) -> float:
        return state[1] - height

    def horizontal(s: float, state: np.ndarray) -> float:
        return state[2]

    def near_infinity(s: float, state: np.ndarray) -> float:
        return 1.0 - 1e-6 - math.hypot(state[0], state[1])

    for event in (at_height, horizontal, near_infinity):
        event.terminal = True  # type: ignore[attr-defined]

    solution = solve_ivp(
        _meridian,
        (0.0, _MAX_ARCLENGTH),
        [neck_radius, 0.0, math.pi / 2.0],
        events=(at_height, horizontal, near_infinity),
        dense_output=True,
        rtol=_RTOL,
        atol=_ATOL,
    )
    reached = len(solution.t_events[0]) > 0
    end = float(solution.t_events[0][0]) if reached else float(solution.t[-1])
    arclength = np.linspace(0.0, end, samples)
    rho, z, _ = solution.sol(arclength)
    if reached:
        z[-1] = height
    return CatenoidProfile(neck_radius=neck_radius, heights=z, radii=rho, reached=reached)


def _radius_mismatch(neck_radius: float, height: float, radius: float) -> float:
    profile = catenoid_profile(neck_radius, height, samples=2)
    if not profile.reached:
        return _NO_SOLUTION
    return float(profile.radii[-1] - radius)


def _deepest_neck(height: float, radius: float) -> tuple[float, float]:
    """Neck radius minimising the mismatch at the circles, with that mismatch."""
    result = minimize_scalar(
        _radius_mismatch,
        bounds=(1e-3 * radius, radius),
        args=(height, radius),
        method='bounded',
        options={'xatol': 1e-10},
    )
    return float(result.x), float(result.fun)


def coaxial_annulus(circle_height: float, radius: float, samples: int = 200) -> CatenoidProfile:
    """Stable (wide-neck) minimal annulus between circles at ``z = ±circle_height``.

    Raises ``InvalidParameterError`` when the circles are too far apart for any
    rotational minimal annulus to connect them.
    """
    if circle_height <= 0.0 or radius <= 0.0 or circle_height**2 + radius**2 >= 1.0:
        raise InvalidParameterError(
            f'Circles at height {circle_height} with radius {radius} must lie in the open ball'
        )
    neck, mismatch = _deepest_neck(circle_height, radius)
    if mismatch > 0.0:
        raise InvalidParameterError(
            f'No connected rotational annulus between circles at ±{circle_height} of radius '
            f'{radius}'
        )
    wide = brentq(
        _radius_mismatch, neck, radius * (1.0 - 1e-12), args=(circle_height, radius), xtol=1e-13
    )
    _logger.debug('Coaxial annulus h=%.4f a=%.4f: neck %.10f', circle_height, radius, wide)
    return catenoid_profile(float(wide), circle_height, samples)


def existence_threshold(radius: float, tolerance: float = 1e-8) -> float:
    """Largest circle height ``h`` for which ``coaxial_annulus(h, radius)`` exists."""
    if not 0.0 < radius < 1.0:
        raise InvalidParameterError(f'Circle radius {radius} must lie in (0, 1)')
    ceiling = math.sqrt(1.0 - radius * radius) * (1.0 - 1e-9)

    def depth(height: float) -> float:
        return _deepest_neck(height, radius)[1]

    low = 1e-4 * ceiling
    if depth(low) > 0.0:
        raise InvalidParameterError(f'No rotational annulus even for nearby circles of {radius}')
    if depth(ceiling) <= 0.0:
        return ceiling
    threshold = float(brentq(depth, low, ceiling, xtol=tolerance))
    _logger.info('Existence threshold for circle radius %.4f: h = %.8f', radius, threshold)
    return threshold


def coaxial_circles(
    circle_height: float, radius: float, segments: int = 64
) -> tuple[np.ndarray, np.ndarray]:
    """The two boundary circles ``z = +h`` and ``z = -h`` with matching azimuths."""
    azimuth = 2.0 * math.pi * np.arange(segments) / segments
    ring = np.column_stack([radius * np.cos(azimuth), radius * np.sin(azimuth)])
    upper = np.column_stack([ring, np.full(segments, circle_height)])
    lower = np.column_stack([ring, np.full(segments, -circle_height)])
    return upper, lower
