"""Discrete ``I_H = Area + 2 H Vol`` on triangle meshes in the Poincaré ball.

Area integrates ``λ² = 4 / (1 - |x|²)²`` over each Euclidean triangle. Volume is
the signed hyperbolic volume of the cones from a reference point ``O`` over the
triangles, reduced to a surface integral of the radial field ``x G(|x|)`` whose
divergence is ``λ³``. For open meshes with ``O`` away from the origin the cone
is closed by a fan from ``O`` over the boundary, whose vertices are fixed.
"""

import logging
import typing as t

import numpy as np
import pydantic

from hplanes.hyperbolic import ORIGIN, BallPoint, InvalidParameterError, check_inside_ball
from hplanes.mesh.model import MeshInvariantError, TriMesh, boundary_half_edges
from hplanes.mesh.quadrature import (
    MAX_LEVEL,
    composite_rule,
    radial_kernel,
    radial_kernel_slope,
    refinement_levels,
)

_logger = logging.getLogger(__name__)

DEFAULT_ORDER = 2
_DEGENERATE_RATIO = 1e-12


class EnergyReport(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    H: float
    area: float = pydantic.Field(ge=0.0)
    volume: float
    energy: float
    gradient_sup_norm: float = pydantic.Field(ge=0.0)
    quadrature_error: float = pydantic.Field(ge=0.0)
    triangle_errors: np.ndarray = pydantic.Field(exclude=True, repr=False)

    @pydantic.model_validator(mode='after')
    def check_energy(self) -> 'EnergyReport':
        if self.energy != self.area + 2.0 * self.H * self.volume:
            raise ValueError('energy must equal area + 2 H volume')
        return self


class _Integrals(t.NamedTuple):
    area: np.ndarray
    volume: np.ndarray
    area_gradient: np.ndarray | None
    volume_gradient: np.ndarray | None


def _reference_array(reference: BallPoint | None) -> np.ndarray:
    if reference is None:
        return np.zeros(3)
    point = reference.as_array() if isinstance(reference, BallPoint) else np.asarray(reference)
    try:
        check_inside_ball(point)
    except ValueError as exc:
        raise InvalidParameterError(f'Reference point {point} is not inside the ball') from exc
    return np.asarray(point, dtype=float)


def _integrate(
    points: np.ndarray,
    triangles: np.ndarray,
    order: int,
    *,
    gradient: bool,
    level_offset: int = 0,
) -> _Integrals:
    m = len(triangles)
    n = len(points)
    area = np.zeros(m)
    volume = np.zeros(m)
    area_gradient = np.zeros((n, 3)) if gradient else None
    volume_gradient = np.zeros((n, 3)) if gradient else None
    if m == 0:
        return _Integrals(area, volume, area_gradient, volume_gradient)

    corners = points[triangles]
    levels = np.minimum(refinement_levels(corners) + level_offset, MAX_LEVEL + 1)
    for level in np.unique(levels):
        selected = np.flatnonzero(levels == level)
        bary, weights = composite_rule(order, int(level))
        c = corners[selected]
        samples = np.einsum('kj,tjd->tkd', bary, c)
        squared = np.sum(samples * samples, axis=-1)
        density = 4.0 / (1.0 - squared) ** 2
        area_vector = 0.5 * np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        euclidean = np.linalg.norm(area_vector, axis=1)
        mean_density = density @ weights
        area[selected] = euclidean * mean_density

        kernel = radial_kernel(np.sqrt(squared))
        flux = np.einsum('tkd,td->tk', samples, area_vector)
        volume[selected] = (kernel * flux) @ weights
        if not gradient:
            continue

        # v_{j+1} - v_{j+2} for every corner j
        opposite = np.stack([c[:, 1] - c[:, 2], c[:, 2] - c[:, 0], c[:, 0] - c[:, 1]], axis=1)
        normal = area_vector / np.where(euclidean > 0.0, euclidean, 1.0)[:, None]
        density_gradient = 16.0 * samples / ((1.0 - squared) ** 3)[..., None]
        per_corner = mean_density[:, None, None] * 0.5 * np.cross(opposite, normal[:, None, :])
        per_corner += euclidean[:, None, None] * np.einsum(
            'k,kj,tkd->tjd', weights, bary, density_gradient
        )
        np.add.at(area_gradient, triangles[selected], per_corner)

        moment = np.einsum('k,tk,tkd->td', weights, kernel, samples)
        per_corner = 0.5 * np.cross(opposite, moment[:, None, :])
        slope = radial_kernel_slope(np.sqrt(squared))
        pointwise = kernel[..., None] * area_vector[:, None, :]
        pointwise += (flux * slope)[..., None] * samples
        per_corner += np.einsum('k,kj,tkd->tjd', weights, bary, pointwise)
        np.add.at(volume_gradient, triangles[selected], per_corner)
    return _Integrals(area, volume, area_gradient, volume_gradient)


def _check_nondegenerate(mesh: TriMesh) -> None:
    if mesh.triangle_count == 0:
        return
    corners = mesh.corners()
    longest = np.max(np.linalg.norm(corners - np.roll(corners, 1, axis=1), axis=-1), axis=1)
    areas = mesh.euclidean_areas()
    bad = np.flatnonzero(areas <= _DEGENERATE_RATIO * longest**2)
    if len(bad):
        raise MeshInvariantError(f'{len(bad)} degenerate triangles, first {int(bad[0])}')


class EnergyEvaluator:
    """``I_H`` and its gradient for one mesh connectivity.

    The closing fan over the boundary is built once, so the evaluator can be
    called repeatedly on moving vertex arrays while the triangles stay fixed.
    """

    def __init__(
        self,
        triangles: np.ndarray,
        H: float,
        reference: BallPoint | None = ORIGIN,
        quadrature_order: int = DEFAULT_ORDER,
    ) -> None:
        if not -1.0 < H < 1.0:
            raise InvalidParameterError(f'H must lie in (-1, 1), got {H}')
        composite_rule(quadrature_order, 0)
        self.H = float(H)
        self.order = quadrature_order
        self.reference = _reference_array(reference)
        self.triangles = np.asarray(triangles, dtype=np.int64)
        self.vertex_count = int(self.triangles.max()) + 1 if len(self.triangles) else 0
        self._fan = np.zeros((0, 3), dtype=np.int64)
        if np.any(self.reference != 0.0):
            # fan triangles (b, a, O) close every boundary half-edge a -> b
            directed = boundary_half_edges(self.triangles)
            apex = np.full(len(directed), -1, dtype=np.int64)
            self._fan = np.column_stack([directed[:, 1], directed[:, 0], apex])

    def integrals(
        self, vertices: np.ndarray, *, gradient: bool
    ) -> tuple[float, float, t.Any, t.Any]:
        """Area, volume and optionally their gradients with respect to ``vertices``."""
        surface = _integrate(vertices, self.triangles, self.order, gradient=gradient)
        area = float(np.sum(surface.area))
        volume = float(np.sum(surface.volume))
        area_gradient, volume_gradient = surface.area_gradient, surface.volume_gradient
        if len(self._fan):
            points = np.vstack([vertices, self.reference])
            fan = np.where(self._fan < 0, len(vertices), self._fan)
            closing = _integrate(points, fan, self.order, gradient=gradient)
            volume += float(np.sum(closing.volume))
            if gradient:
                volume_gradient = volume_gradient + closing.volume_gradient[: len(vertices)]
        return area, volume, area_gradient, volume_gradient

    def energy(self, vertices: np.ndarray) -> float:
        area, volume, _, _ = self.integrals(vertices, gradient=False)
        return area + 2.0 * self.H * volume

    def __call__(self, vertices: np.ndarray) -> tuple[float, np.ndarray]:
        area, volume, area_gradient, volume_gradient = self.integrals(vertices, gradient=True)
        return area + 2.0 * self.H * volume, area_gradient + 2.0 * self.H * volume_gradient

    def triangle_errors(self, vertices: np.ndarray) -> np.ndarray:
        """Per-triangle change of ``I_H`` under one extra subdivision level."""
        coarse = _integrate(vertices, self.triangles, self.order, gradient=False)
        fine = _integrate(vertices, self.triangles, self.order, gradient=False, level_offset=1)
        return np.abs(coarse.area - fine.area) + 2.0 * abs(self.H) * np.abs(
            coarse.volume - fine.volume
        )


def hyperbolic_area(mesh: TriMesh, quadrature_order: int = DEFAULT_ORDER) -> float:
    _check_nondegenerate(mesh)
    result = _integrate(mesh.vertices, mesh.triangles, quadrature_order, gradient=False)
    return float(np.sum(result.area))


def enclosed_volume(
    mesh: TriMesh, reference: BallPoint = ORIGIN, quadrature_order: int = DEFAULT_ORDER
) -> float:
    """Signed hyperbolic volume of the cone from ``reference`` over the oriented mesh."""
    evaluator = EnergyEvaluator(mesh.triangles, 0.0, reference, quadrature_order)
    return evaluator.integrals(mesh.vertices, gradient=False)[1]


def area_gradient(mesh: TriMesh, quadrature_order: int = DEFAULT_ORDER) -> np.ndarray:
    result = _integrate(mesh.vertices, mesh.triangles, quadrature_order, gradient=True)
    return t.cast(np.ndarray, result.area_gradient)


def volume_gradient(
    mesh: TriMesh, reference: BallPoint = ORIGIN, quadrature_order: int = DEFAULT_ORDER
) -> np.ndarray:
    evaluator = EnergyEvaluator(mesh.triangles, 0.0, reference, quadrature_order)
    return t.cast(np.ndarray, evaluator.integrals(mesh.vertices, gradient=True)[3])


def gradient_ih(
    mesh: TriMesh, H: float, reference: BallPoint = ORIGIN, quadrature_order: int = DEFAULT_ORDER
) -> np.ndarray:
    """Gradient of the discrete ``I_H`` in Euclidean vertex coordinates.

    Rows of boundary vertices are included; ``mesh.fixed_mask`` marks them.
    """
    return EnergyEvaluator(mesh.triangles, H, reference, quadrature_order)(mesh.vertices)[1]


def energy_ih(
    mesh: TriMesh, H: float, reference: BallPoint = ORIGIN, quadrature_order: int = DEFAULT_ORDER
) -> EnergyReport:
    _check_nondegenerate(mesh)
    evaluator = EnergyEvaluator(mesh.triangles, H, reference, quadrature_order)
    area, volume, area_grad, volume_grad = evaluator.integrals(mesh.vertices, gradient=True)
    gradient = area_grad + 2.0 * evaluator.H * volume_grad
    interior = gradient[~mesh.fixed_mask]
    errors = evaluator.triangle_errors(mesh.vertices)
    return EnergyReport(
        H=evaluator.H,
        area=area,
        volume=volume,
        energy=area + 2.0 * evaluator.H * volume,
        gradient_sup_norm=float(np.max(np.abs(interior))) if interior.size else 0.0,
        quadrature_error=float(np.sum(errors)),
        triangle_errors=errors,
    )


def vertex_mean_curvature(
    mesh: TriMesh, reference: BallPoint = ORIGIN, quadrature_order: int = DEFAULT_ORDER
) -> np.ndarray:
    """Per-vertex ``-(∇Area · n) / (2 ∇Vol · n)``; NaN on the boundary and on flat stars.

    Sign follows the ``I_H`` convention: a sphere with outward normals is
    critical for ``H = -coth r``.
    """
    evaluator = EnergyEvaluator(mesh.triangles, 0.0, reference, quadrature_order)
    _, _, area_grad, volume_grad = evaluator.integrals(mesh.vertices, gradient=True)
    normals = mesh.vertex_normals()
    area_normal = np.einsum('ij,ij->i', area_grad, normals)
    volume_normal = np.einsum('ij,ij->i', volume_grad, normals)
    scale = np.linalg.norm(volume_grad, axis=1)
    with np.errstate(divide='ignore', invalid='ignore'):
        curvature = -area_normal / (2.0 * volume_normal)
    curvature[np.abs(volume_normal) <= 1e-12 * np.maximum(scale, 1e-300)] = np.nan
    curvature[mesh.fixed_mask] = np.nan
    return curvature
