"""Minimizing H-disks and least-area annuli by preconditioned projected descent.

Interior vertices move along ``-P⁻¹ ∇I_H`` where ``P`` is the conformally
weighted cotangent Laplacian of the current mesh, with Armijo backtracking and
nearest-point projection onto the solver ball. Boundary loops never move.
"""

import enum
import logging
import math
import time
import typing as t

import numpy as np
import numpy.typing as npt
import pydantic
from scipy.sparse import coo_matrix, identity
from scipy.sparse.csgraph import dijkstra
from scipy.sparse.linalg import splu

from hplanes.hyperbolic import ORIGIN, BallPoint, GeodesicBall, InvalidParameterError, distance
from hplanes.mesh.energy import EnergyEvaluator, EnergyReport, energy_ih
from hplanes.mesh.generators import annulus_between, cone_fill
from hplanes.mesh.model import MIN_ANGLE_DEGREES, Topology, TriMesh, triangle_angles
from hplanes.mesh.remesh import RemeshingError, refine_and_improve
from hplanes.runtime_state import runtime_state
from hplanes.telemetry import telemetry

_logger = logging.getLogger(__name__)

STALL_SCALE = 1e-14
REMESH_TOLERANCE = 1e-3
NECK_MINIMUM = 1e-3
TRIANGLE_AREA_MINIMUM = 1e-14
_COT_BOUNDS = (1e-6, 1e4)
_MASS_SHIFT = 1e-6
_NECK_LEVELS = np.linspace(0.05, 0.95, 19)


class SolverError(RuntimeError):
    pass


class AnnulusDegenerationError(SolverError):
    def __init__(self, message: str, neck: float) -> None:
        super().__init__(message)
        self.neck = neck


class NonSimpleBoundaryError(ValueError):
    pass


class Descent(enum.StrEnum):
    PRECONDITIONED = 'preconditioned'
    EUCLIDEAN = 'euclidean'


class Termination(enum.StrEnum):
    CONVERGED = 'converged'
    MAX_ITERATIONS = 'max_iterations'
    STALLED = 'stalled'


class SolverConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    H: float = pydantic.Field(default=0.0, gt=-1.0, lt=1.0)
    ball: GeodesicBall
    max_iterations: int = pydantic.Field(default=400, ge=0)
    gradient_tolerance: float = pydantic.Field(default=1e-5, gt=0.0)
    backtracking_factor: float = pydantic.Field(default=0.5, gt=0.0, lt=1.0)
    sufficient_decrease: float = pydantic.Field(default=1e-4, gt=0.0, lt=1.0)
    remesh_every: int = pydantic.Field(default=50, ge=0)
    target_edge_length: float | None = pydantic.Field(default=None, gt=0.0)
    quadrature_order: int = 2
    descent: Descent = Descent.PRECONDITIONED
    reference: BallPoint = ORIGIN

    @pydantic.model_validator(mode='after')
    def check_convexity(self) -> 'SolverConfig':
        # the ball is H0-convex with H0 = coth r > 1 > |H|
        if not abs(self.H) < self.ball.boundary_mean_curvature:
            raise ValueError(f'|H| = {abs(self.H)} must stay below coth r of the solver ball')
        if self.quadrature_order not in (1, 2, 4, 5):
            raise ValueError(f'Unsupported quadrature order {self.quadrature_order}')
        return self


class SolveReport(pydantic.BaseModel):
    final: EnergyReport
    iterations: int
    energy_history: list[float]
    step_sizes: list[float] = pydantic.Field(default_factory=list)
    projection_count: int = 0
    converged: bool
    termination: Termination
    remesh_indices: list[int] = pydantic.Field(default_factory=list)
    rejected_remeshes: int = 0
    neck: float | None = None

    @pydantic.model_validator(mode='after')
    def check_history(self) -> 'SolveReport':
        restarts = set(self.remesh_indices)
        for i in range(1, len(self.energy_history)):
            if i in restarts:
                continue
            previous, current = self.energy_history[i - 1], self.energy_history[i]
            if current > previous + 1e-12 * max(1.0, abs(previous)):
                raise ValueError(f'Energy increased at accepted step {i}')
        return self


def _cotangent_laplacian(vertices: np.ndarray, triangles: np.ndarray) -> t.Any:
    corners = vertices[triangles]
    rows, cols, weights = [], [], []
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        first = corners[:, i] - corners[:, k]
        second = corners[:, j] - corners[:, k]
        cross = np.linalg.norm(np.cross(first, second), axis=1)
        cot = np.sum(first * second, axis=1) / np.maximum(cross, 1e-300)
        midpoint = 0.5 * (corners[:, i] + corners[:, j])
        density = 4.0 / (1.0 - np.sum(midpoint * midpoint, axis=1)) ** 2
        weight = 0.5 * np.clip(cot, *_COT_BOUNDS) * density
        rows.extend([triangles[:, i], triangles[:, j]])
        cols.extend([triangles[:, j], triangles[:, i]])
        weights.extend([weight, weight])
    n = len(vertices)
    off = coo_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    degree = np.asarray(off.sum(axis=1)).ravel()
    return coo_matrix((degree, (np.arange(n), np.arange(n))), shape=(n, n)).tocsr() - off


class _Descent:
    """Line-search state for one mesh connectivity."""

    def __init__(self, mesh: TriMesh, cfg: SolverConfig) -> None:
        self.mesh = mesh
        self.cfg = cfg
        self.evaluator = EnergyEvaluator(
            mesh.triangles, cfg.H, cfg.reference, cfg.quadrature_order
        )
        self.interior = mesh.interior_indices
        self.radius = cfg.ball.euclidean_radius
        self.previous_step = 1.0
        self.projections = 0
        self.min_angle = math.radians(MIN_ANGLE_DEGREES)
        self._factor: t.Any = None

    def _precondition(self, gradient: np.ndarray) -> np.ndarray:
        if self.cfg.descent == Descent.EUCLIDEAN or len(self.interior) == 0:
            return gradient
        if self._factor is None:
            laplacian = _cotangent_laplacian(self.mesh.vertices, self.mesh.triangles)
            block = laplacian[self.interior][:, self.interior]
            shift = _MASS_SHIFT * float(np.mean(block.diagonal()))
            system = (block + shift * identity(len(self.interior), format='csr')).tocsc()
            self._factor = splu(system)
        return t.cast(np.ndarray, self._factor.solve(gradient))

    def reset_preconditioner(self, vertices: np.ndarray) -> None:
        """Rebuild the Laplacian factor on ``vertices`` at its next use."""
        self.mesh = self.mesh.with_vertices(vertices)
        self._factor = None

    def project(self, vertices: np.ndarray) -> tuple[np.ndarray, int]:
        norms = np.linalg.norm(vertices, axis=1)
        outside = norms > self.radius
        if np.any(outside):
            vertices = vertices.copy()
            vertices[outside] *= (self.radius / norms[outside])[:, None]
        return vertices, int(np.sum(outside))

    def _admissible(self, old: np.ndarray, new: np.ndarray) -> bool:
        triangles = self.mesh.triangles
        before = old[triangles]
        after = new[triangles]
        old_normal = np.cross(before[:, 1] - before[:, 0], before[:, 2] - before[:, 0])
        new_normal = np.cross(after[:, 1] - after[:, 0], after[:, 2] - after[:, 0])
        if np.any(np.sum(old_normal * new_normal, axis=1) <= 0.0):
            return False
        return bool(np.min(triangle_angles(after)) >= self.min_angle)

    def gradient(self, vertices: np.ndarray) -> tuple[float, np.ndarray]:
        energy, gradient = self.evaluator(vertices)
        gradient = gradient.copy()
        gradient[self.mesh.fixed_mask] = 0.0
        return energy, gradient

    def step(self, vertices: np.ndarray) -> tuple[np.ndarray, float, float, bool, float]:
        """One backtracking step: new vertices, old and new energy, acceptance, step size."""
        energy, gradient = self.gradient(vertices)
        if not math.isfinite(energy):
            raise SolverError(f'Non-finite energy {energy}')
        interior_gradient = gradient[self.interior]
        if interior_gradient.size == 0:
            return vertices, energy, energy, False, 0.0
        if np.max(np.abs(interior_gradient)) <= self.cfg.gradient_tolerance:
            return vertices, energy, energy, False, 0.0

        direction = np.zeros_like(vertices)
        direction[self.interior] = -self._precondition(interior_gradient)
        slope = float(np.sum(direction * gradient))
        if slope >= 0.0:
            # preconditioner lost definiteness on a distorted mesh
            direction = -gradient
            slope = float(np.sum(direction * gradient))

        largest = float(np.max(np.linalg.norm(direction, axis=1)))
        extent = max(float(np.max(np.linalg.norm(vertices, axis=1))), 1e-12)
        step = min(1.0, 2.0 * self.previous_step)
        while step * largest >= STALL_SCALE * extent:
            trial, projected = self.project(vertices + step * direction)
            if self._admissible(vertices, trial):
                trial_energy = self.evaluator.energy(trial)
                target = energy + self.cfg.sufficient_decrease * step * slope
                if trial_energy <= target and trial_energy < energy:
                    self.previous_step = step
                    self.projections += projected
                    return trial, energy, trial_energy, True, step
            step *= self.cfg.backtracking_factor
        _logger.debug('Line search stalled at step %.3e', step)
        return vertices, energy, energy, False, step


def descend_step(mesh: TriMesh, cfg: SolverConfig) -> tuple[TriMesh, bool, float]:
    """Single Armijo step along the preconditioned negative gradient."""
    descent = _Descent(mesh, cfg)
    vertices, _, _, accepted, step = descent.step(mesh.vertices)
    if not accepted:
        return mesh, False, step
    return mesh.with_vertices(vertices), True, step


def _check_boundary(boundary: np.ndarray, ball: GeodesicBall) -> None:
    if boundary.ndim != 2 or boundary.shape[1] != 3 or len(boundary) < 3:
        raise InvalidParameterError(f'Boundary must be an (n >= 3, 3) array, got {boundary.shape}')
    norms = np.linalg.norm(boundary, axis=1)
    if np.max(norms) > ball.euclidean_radius * (1.0 + 1e-9):
        raise InvalidParameterError(
            f'Boundary leaves the solver ball: |p| = {np.max(norms)} > {ball.euclidean_radius}'
        )
    edges = np.linalg.norm(boundary - np.roll(boundary, -1, axis=0), axis=1)
    if np.min(edges) <= 0.0:
        raise NonSimpleBoundaryError('Boundary has repeated consecutive points')
    gaps = np.linalg.norm(boundary[:, None, :] - boundary[None, :, :], axis=-1)
    n = len(boundary)
    index = np.arange(n)
    separation = np.abs(index[:, None] - index[None, :])
    separation = np.minimum(separation, n - separation)
    distant = separation > 1
    if np.any(gaps[distant] <= 1e-9 * float(np.mean(edges))):
        raise NonSimpleBoundaryError('Boundary polyline touches itself')


def _sorted_rows(points: np.ndarray) -> np.ndarray:
    return points[np.lexsort(points.T[::-1])]


def _matches_boundary(mesh: TriMesh, boundary: np.ndarray) -> bool:
    """Whether some boundary loop visits exactly the polyline's points, in any rotation."""
    wanted = _sorted_rows(boundary)
    return any(
        len(loop) == len(boundary)
        and np.allclose(_sorted_rows(mesh.vertices[loop]), wanted, atol=1e-12)
        for loop in mesh.boundary_loops
    )


def _remesh(
    mesh: TriMesh, cfg: SolverConfig, energy: float
) -> tuple[TriMesh, bool]:
    targets: list[float | None] = [cfg.target_edge_length]
    if cfg.target_edge_length is not None:
        targets.append(cfg.target_edge_length / 2.0)
    for target in targets:
        try:
            candidate = refine_and_improve(mesh, target)
        except RemeshingError as exc:
            _logger.warning('Remesh at target %s failed: %s', target, exc)
            continue
        candidate_energy = EnergyEvaluator(
            candidate.triangles, cfg.H, cfg.reference, cfg.quadrature_order
        ).energy(candidate.vertices)
        if candidate_energy <= energy + REMESH_TOLERANCE * abs(energy):
            return candidate, True
        _logger.warning(
            'Rejected remesh at target %s: energy %.8g -> %.8g', target, energy, candidate_energy
        )
    return mesh, False


def _descend(
    mesh: TriMesh,
    cfg: SolverConfig,
    *,
    remesh: bool,
    monitor: t.Callable[[TriMesh], object] | None = None,
    monitor_every: int = 10,
) -> tuple[TriMesh, SolveReport]:
    descent = _Descent(mesh, cfg)
    vertices = mesh.vertices
    history: list[float] = [descent.evaluator.energy(vertices)]
    steps: list[float] = []
    remesh_indices: list[int] = []
    rejected = 0
    projections = 0
    termination = Termination.MAX_ITERATIONS
    iterations = 0
    for iteration in range(cfg.max_iterations):
        if remesh and cfg.remesh_every and iteration and iteration % cfg.remesh_every == 0:
            current = mesh.with_vertices(vertices)
            candidate, accepted = _remesh(current, cfg, history[-1])
            if accepted:
                projections += descent.projections
                mesh = candidate
                descent = _Descent(mesh, cfg)
                vertices = mesh.vertices
                history.append(descent.evaluator.energy(vertices))
                remesh_indices.append(len(history) - 1)
            else:
                rejected += 1

        new_vertices, _, new_energy, accepted, step = descent.step(vertices)
        iterations = iteration + 1
        if not accepted:
            termination = Termination.CONVERGED if step == 0.0 else Termination.STALLED
            iterations = iteration
            break
        vertices = new_vertices
        history.append(new_energy)
        steps.append(step)
        # the preconditioner follows the geometry it was built on
        if iteration % 10 == 9:
            descent.reset_preconditioner(vertices)
        if monitor is not None and iteration % monitor_every == 0:
            monitor(mesh.with_vertices(vertices))

    final_mesh = mesh.with_vertices(vertices)
    final_mesh.check_invariants()
    report = energy_ih(final_mesh, cfg.H, cfg.reference, cfg.quadrature_order)
    converged = report.gradient_sup_norm <= cfg.gradient_tolerance
    if converged:
        termination = Termination.CONVERGED
    if termination == Termination.STALLED:
        _logger.warning(
            'Solve stalled after %d iterations (|g| = %.3e)', iterations, report.gradient_sup_norm
        )
    return final_mesh, SolveReport(
        final=report,
        iterations=iterations,
        energy_history=history,
        step_sizes=steps,
        projection_count=projections + descent.projections,
        converged=converged,
        termination=termination,
        remesh_indices=remesh_indices,
        rejected_remeshes=rejected,
    )


def _run(
    mesh: TriMesh,
    cfg: SolverConfig,
    *,
    remesh: bool,
    monitor: t.Callable[[TriMesh], object] | None = None,
) -> tuple[TriMesh, SolveReport]:
    topology = str(mesh.topology)
    telemetry.record_solve_started(topology)
    started = time.monotonic()
    try:
        final_mesh, report = _descend(mesh, cfg, remesh=remesh, monitor=monitor)
    except Exception:
        runtime_state.record_solve(topology, 'error')
        telemetry.record_solve_completed(topology, 'error', time.monotonic() - started)
        raise
    runtime_state.record_solve(topology, str(report.termination))
    telemetry.record_solve_completed(
        topology, str(report.termination), time.monotonic() - started, report.iterations
    )
    return final_mesh, report


def minimize_disk(
    boundary: npt.ArrayLike, cfg: SolverConfig, init: TriMesh | None = None
) -> tuple[TriMesh, SolveReport]:
    """Minimize ``I_H`` over disks spanning ``boundary`` inside ``cfg.ball``."""
    points = np.asarray(boundary, dtype=float)
    _check_boundary(points, cfg.ball)
    if init is None:
        init = cone_fill(points)
    elif init.topology != Topology.DISK:
        raise InvalidParameterError(f'Initial mesh must be a disk, got {init.topology}')
    if not _matches_boundary(init, points):
        raise InvalidParameterError('Initial mesh boundary does not match the boundary polyline')
    if np.max(np.linalg.norm(init.vertices, axis=1)) > cfg.ball.euclidean_radius * (1.0 + 1e-9):
        init = init.with_vertices(_Descent(init, cfg).project(init.vertices)[0])

    mesh, report = _run(init, cfg, remesh=True)
    _logger.info(
        'Disk solve H=%.3f: %d iterations, I_H=%.8g, |g|=%.2e (%s)',
        cfg.H,
        report.iterations,
        report.final.energy,
        report.final.gradient_sup_norm,
        report.termination,
    )
    return mesh, report


def _level_crossings(
    vertices: np.ndarray, triangles: np.ndarray, values: np.ndarray, level: float
) -> np.ndarray:
    """Segments ``(k, 2, 3)`` of the level set of a piecewise-linear function."""
    corner_values = values[triangles] - level
    corners = vertices[triangles]
    ends_a = [0, 1, 2]
    ends_b = [1, 2, 0]
    crosses = corner_values[:, ends_a] * corner_values[:, ends_b] < 0.0
    with np.errstate(divide='ignore', invalid='ignore'):
        fraction = corner_values[:, ends_a] / (corner_values[:, ends_a] - corner_values[:, ends_b])
    points = corners[:, ends_a] + fraction[..., None] * (corners[:, ends_b] - corners[:, ends_a])
    pairs = np.sum(crosses, axis=1) == 2
    order = np.argsort(~crosses[pairs], axis=1, kind='stable')[:, :2]
    selected = points[pairs]
    rows = np.arange(len(selected))[:, None]
    return selected[rows, order]


def neck_circumference(mesh: TriMesh) -> float:
    """Shortest hyperbolic length among level loops separating the two boundaries."""
    if mesh.topology != Topology.ANNULUS or len(mesh.boundary_loops) != 2:
        raise InvalidParameterError('Neck length is defined for annuli with two boundary loops')
    edges = mesh.edges()
    lengths = np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)
    n = mesh.vertex_count
    graph = coo_matrix((lengths, (edges[:, 0], edges[:, 1])), shape=(n, n)).tocsr()
    to_first = dijkstra(graph, directed=False, indices=mesh.boundary_loops[0], min_only=True)
    to_second = dijkstra(graph, directed=False, indices=mesh.boundary_loops[1], min_only=True)
    values = to_first / np.maximum(to_first + to_second, 1e-300)
    shortest = math.inf
    for level in _NECK_LEVELS:
        segments = _level_crossings(mesh.vertices, mesh.triangles, values, float(level))
        if len(segments) == 0:
            continue
        length = float(np.sum(distance(segments[:, 0], segments[:, 1])))
        shortest = min(shortest, length)
    return shortest


def _check_neck(mesh: TriMesh) -> float:
    neck = neck_circumference(mesh)
    smallest_area = float(np.min(mesh.euclidean_areas()))
    if neck < NECK_MINIMUM or smallest_area < TRIANGLE_AREA_MINIMUM:
        raise AnnulusDegenerationError(
            f'Annulus neck pinched: circumference {neck:.3e}, '
            f'smallest triangle {smallest_area:.3e}',
            neck,
        )
    return neck


def _canonical_order(first: np.ndarray, second: np.ndarray) -> bool:
    """Whether the pair is already in the order used for solving."""
    return tuple(first.ravel()) <= tuple(second.ravel())


def minimize_annulus(
    boundary_plus: npt.ArrayLike,
    boundary_minus: npt.ArrayLike,
    cfg: SolverConfig,
    init: TriMesh | None = None,
    rows: int = 8,
) -> tuple[TriMesh, SolveReport]:
    """Least-area annulus between two fixed polylines (``cfg.H`` must be 0).

    The pair is put into a canonical order first, so exchanging the two
    boundaries yields the same surface.
    """
    if cfg.H != 0.0:
        raise InvalidParameterError(f'Annuli are solved for H = 0, got {cfg.H}')
    first = np.asarray(boundary_plus, dtype=float)
    second = np.asarray(boundary_minus, dtype=float)
    _check_boundary(first, cfg.ball)
    _check_boundary(second, cfg.ball)
    gap = np.min(np.linalg.norm(first[:, None, :] - second[None, :, :], axis=-1))
    if gap <= 0.0:
        raise NonSimpleBoundaryError('Annulus boundaries intersect')
    if init is None:
        if not _canonical_order(first, second):
            first, second = second, first
        init = annulus_between(first, second, rows)
    elif init.topology != Topology.ANNULUS:
        raise InvalidParameterError(f'Initial mesh must be an annulus, got {init.topology}')
    if not (_matches_boundary(init, first) and _matches_boundary(init, second)):
        raise InvalidParameterError('Initial annulus does not span the two boundaries')
    if np.max(np.linalg.norm(init.vertices, axis=1)) > cfg.ball.euclidean_radius * (1.0 + 1e-9):
        init = init.with_vertices(_Descent(init, cfg).project(init.vertices)[0])

    _check_neck(init)
    mesh, report = _run(init, cfg, remesh=False, monitor=_check_neck)
    neck = _check_neck(mesh)
    _logger.info(
        'Annulus solve: %d iterations, area=%.8g, neck=%.4g (%s)',
        report.iterations,
        report.final.area,
        neck,
        report.termination,
    )
    return mesh, report.model_copy(update={'neck': neck})
