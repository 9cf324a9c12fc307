"""Exhaustion of H³ by geodesic balls and the annulus barrier far from the origin.

Each stage projects the ideal curve onto the sphere ``∂B_r``, keeps it inside the
band ``∂B_r ∩ CH_H(Γ)`` of the sampled shifted hull and solves a minimizing H-disk
on it, warm-started from the previous stage. Core diagnostics compare consecutive
disks inside a fixed ball ``B_K``.

The barrier profile solves least-area annuli between the traces of two small
round circles straddling the curve near its smooth point. Their distance to the
origin bounds how close a nonseparating minimizing disk can come.
"""

import logging
import math
import typing as t

import numpy as np
import numpy.typing as npt
import pydantic
from scipy.optimize import brentq, minimize_scalar
from scipy.spatial import cKDTree

from hplanes.curves import (
    IdealCurve,
    RoundCircle,
    angular_hausdorff,
    polyline_angular_distance,
    resample,
    rotation_between,
    winding_numbers,
)
from hplanes.hyperbolic import (
    GeodesicBall,
    InvalidParameterError,
    distance,
    distance_to_origin,
    geodesic_ball,
    mobius_translation,
)
from hplanes.mesh.closest import closest_points_on_mesh
from hplanes.mesh.energy import hyperbolic_area
from hplanes.mesh.generators import annulus_from_rows, extend_disk, interpolate_rows
from hplanes.mesh.model import MeshInvariantError, TriMesh
from hplanes.mesh.remesh import RemeshingError
from hplanes.runtime_state import runtime_state
from hplanes.solver import (
    SolveReport,
    SolverConfig,
    SolverError,
    minimize_annulus,
    minimize_disk,
)
from hplanes.telemetry import telemetry
from hplanes.umbilic import ShiftedHullSampler, supporting_halfspaces

_logger = logging.getLogger(__name__)

BAND_WINDOW = 0.6
TAU_OFFSET = 0.05
TAU_RADIUS = 0.6
MONOTONE_SLACK = 1e-6
_BAND_GRID = 121
_STAGE_ERRORS = (
    SolverError,
    RemeshingError,
    MeshInvariantError,
    InvalidParameterError,
)


class RadiusTooSmallError(ValueError):
    pass


class BandError(ValueError):
    pass


class AnnularBand(pydantic.BaseModel):
    """``∂B_r ∩ CH_H(Γ)`` described along the meridians through the curve samples.

    Sample ``i`` spans the directions ``cos t·d_i + sin t·ν_i`` for
    ``lower[i] <= t <= upper[i]``, where ``ν_i`` points into ``D⁺``.
    """

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    hyperbolic_radius: float
    euclidean_radius: float
    H: float
    directions: np.ndarray
    normals: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    axis: np.ndarray

    def points(self, offsets: npt.ArrayLike) -> np.ndarray:
        t_values = np.asarray(offsets, dtype=float)[:, None]
        unit = np.cos(t_values) * self.directions + np.sin(t_values) * self.normals
        return self.euclidean_radius * unit

    def alpha_plus(self) -> np.ndarray:
        return self.points(self.upper)

    def alpha_minus(self) -> np.ndarray:
        return self.points(self.lower)

    def midline(self) -> np.ndarray:
        return self.points(0.5 * (self.lower + self.upper))

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def exit_distances(self) -> np.ndarray:
        """Hyperbolic chord from each radially projected sample to the nearest band point."""
        angle = np.maximum(np.maximum(self.lower, -self.upper), 0.0)
        return 2.0 * np.arcsinh(math.sinh(self.hyperbolic_radius) * np.sin(0.5 * angle))

    def offsets_of(self, points: npt.ArrayLike) -> tuple[np.ndarray, np.ndarray]:
        """Nearest meridian index and angular offset along it for each point."""
        unit = np.atleast_2d(np.asarray(points, dtype=float))
        unit = unit / np.linalg.norm(unit, axis=1)[:, None]
        _, nearest = cKDTree(self.directions).query(unit)
        along = np.sum(unit * self.directions[nearest], axis=1)
        across = np.sum(unit * self.normals[nearest], axis=1)
        return nearest, np.arctan2(across, along)

    def contains(self, points: npt.ArrayLike, slack: float = 1e-9) -> np.ndarray:
        array = np.atleast_2d(np.asarray(points, dtype=float))
        on_sphere = np.abs(np.linalg.norm(array, axis=1) - self.euclidean_radius) <= 1e-6
        nearest, offset = self.offsets_of(array)
        inside = (offset >= self.lower[nearest] - slack) & (offset <= self.upper[nearest] + slack)
        return on_sphere & inside

    def winding(self, loop: npt.ArrayLike) -> int:
        """Number of turns a closed loop makes around the band."""
        unit = np.asarray(loop, dtype=float)
        unit = unit / np.linalg.norm(unit, axis=1)[:, None]
        return int(winding_numbers(unit, self.axis[None, :], -self.axis)[0])


def _meridian_violation(
    hull: ShiftedHullSampler, direction: np.ndarray, normal: np.ndarray, radius: float
) -> t.Callable[[float], float]:
    def violation(offset: float) -> float:
        point = radius * (math.cos(offset) * direction + math.sin(offset) * normal)
        return float(hull.violations(point)[0])

    return violation


def _band_interval(
    violation: t.Callable[[float], float], grid_values: np.ndarray, grid: np.ndarray
) -> tuple[float, float, float]:
    """``(lower, upper, depth)`` of the sublevel set ``violation <= 0`` around its minimum.

    A positive depth means the meridian misses the set; the interval collapses to the minimiser.
    """
    k = int(np.argmin(grid_values))
    left = grid[max(k - 1, 0)]
    right = grid[min(k + 1, len(grid) - 1)]
    best = minimize_scalar(
        violation, bounds=(left, right), method='bounded', options={'xatol': 1e-12}
    )
    centre, depth = float(best.x), float(best.fun)
    if grid_values[k] < depth:
        centre, depth = float(grid[k]), float(grid_values[k])
    if depth >= 0.0:
        return centre, centre, depth
    first, last = float(grid[0]), float(grid[-1])
    lower = first if violation(first) <= 0.0 else brentq(violation, first, centre, xtol=1e-13)
    upper = last if violation(last) <= 0.0 else brentq(violation, centre, last, xtol=1e-13)
    return float(lower), float(upper), depth


def annular_band(
    curve: IdealCurve, hull: ShiftedHullSampler, r: float, tol: float = 1e-6
) -> AnnularBand:
    """Sample the hull band on ``∂B_r`` along the meridian through every curve point.

    Raises ``RadiusTooSmallError`` where a meridian misses the hull by more than ``tol``.
    """
    ball = geodesic_ball(r)
    radius = ball.euclidean_radius
    directions = np.asarray(curve.points, dtype=float)
    normals = np.array([curve.normal_at(i) for i in range(len(curve))])
    grid = np.linspace(-BAND_WINDOW, BAND_WINDOW, _BAND_GRID)
    sample_points = radius * (
        np.cos(grid)[None, :, None] * directions[:, None, :]
        + np.sin(grid)[None, :, None] * normals[:, None, :]
    )
    grid_values = hull.violations(sample_points.reshape(-1, 3)).reshape(len(directions), -1)

    lower = np.empty(len(directions))
    upper = np.empty(len(directions))
    for i, (direction, normal) in enumerate(zip(directions, normals, strict=True)):
        violation = _meridian_violation(hull, direction, normal, radius)
        lower[i], upper[i], depth = _band_interval(violation, grid_values[i], grid)
        if depth > tol:
            raise RadiusTooSmallError(
                f'Hull band on the sphere of radius {r} misses curve sample {i} by {depth:.3e}'
            )
    if np.any(np.isclose(lower, -BAND_WINDOW)) or np.any(np.isclose(upper, BAND_WINDOW)):
        _logger.warning('Hull band at r=%.3f is wider than the search window', r)
    _logger.debug(
        'Band at r=%.3f: width %.3e .. %.3e rad',
        r,
        float(np.min(upper - lower)),
        float(np.max(upper - lower)),
    )
    return AnnularBand(
        hyperbolic_radius=r,
        euclidean_radius=radius,
        H=hull.H,
        directions=directions,
        normals=normals,
        lower=lower,
        upper=upper,
        axis=curve.axis(),
    )


def band_slack(H: float, r: float, tol: float = 1e-6) -> float:
    """How far the radial projection of a tame curve may sit outside the band on ``∂B_r``.

    The first term is the chord between a geodesic plane and the H-cap over the
    same circle near infinity; the second bounds the distance of the projection
    from ``CH_0``.
    """
    cap_chord = 2.0 * math.asinh(abs(H) / (2.0 * math.sqrt(1.0 - H * H)))
    return cap_chord + 2.0 * math.asinh(2.0 * math.exp(-r)) + tol


def boundary_curve(
    curve: IdealCurve,
    H: float,
    r: float,
    hull: ShiftedHullSampler | None = None,
    band: AnnularBand | None = None,
) -> np.ndarray:
    """Radial projection of ``curve`` onto ``∂B_r``, kept inside the hull band.

    Samples whose radial projection leaves the band by at most ``band_slack`` move
    to the band's midline; a sample further out raises ``RadiusTooSmallError``.
    The result is resampled uniformly and must wind once around the band.
    """
    if band is None:
        hull = hull or supporting_halfspaces(curve, H)
        band = annular_band(curve, hull, r)
    exits = band.exit_distances()
    worst = int(np.argmax(exits))
    if exits[worst] > band_slack(H, r):
        raise RadiusTooSmallError(
            f'Curve sample {worst} leaves the hull band at r={r} by {exits[worst]:.3e}, '
            f'beyond the slack {band_slack(H, r):.3e}'
        )
    inside = (band.lower <= 0.0) & (band.upper >= 0.0)
    offsets = np.where(inside, 0.0, 0.5 * (band.lower + band.upper))
    unit = resample(band.points(offsets) / band.euclidean_radius, len(curve))
    gamma = band.euclidean_radius * unit
    if abs(band.winding(gamma)) != 1:
        raise RadiusTooSmallError(f'Boundary curve at r={r} is not essential in the hull band')
    return gamma


def ideal_gap(gamma: npt.ArrayLike, curve: IdealCurve) -> float:
    """Angular Hausdorff distance between the radial projection of ``gamma`` and ``curve``."""
    points = np.asarray(gamma, dtype=float)
    return angular_hausdorff(points / np.linalg.norm(points, axis=1)[:, None], curve.points)


def core_restriction(mesh: TriMesh, K: float) -> TriMesh:
    """Triangles whose centroid lies in the geodesic ball ``B_K``."""
    radius = math.tanh(K / 2.0)
    centroids = mesh.corners().mean(axis=1)
    return mesh.restrict(np.linalg.norm(centroids, axis=1) < radius)


def core_hausdorff(first: TriMesh, second: TriMesh, K: float) -> float:
    """Hyperbolic Hausdorff distance from each mesh's ``B_K`` part to the other mesh."""
    a = core_restriction(first, K)
    b = core_restriction(second, K)
    if a.triangle_count == 0 or b.triangle_count == 0:
        return math.inf
    forward = closest_points_on_mesh(second, a.vertices).hyperbolic
    backward = closest_points_on_mesh(first, b.vertices).hyperbolic
    return float(max(np.max(forward), np.max(backward)))


class ExhaustionStage(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int
    ball: GeodesicBall
    gamma: np.ndarray
    band: AnnularBand | None = None
    disk: TriMesh | None = None
    solve: SolveReport | None = None
    hausdorff_to_prev_on_core: float | None = None
    ideal_gap: float
    core_area: float | None = None
    core_area_bound: float
    core_components: int | None = None
    containment: float | None = None
    error: str | None = None

    @pydantic.model_validator(mode='after')
    def check_gamma(self) -> 'ExhaustionStage':
        if len(self.gamma):
            norms = np.linalg.norm(self.gamma, axis=1)
            if np.max(np.abs(norms - self.ball.euclidean_radius)) > 1e-9:
                raise ValueError(f'Stage {self.n} boundary curve leaves the ball sphere')
        return self

    @property
    def ok(self) -> bool:
        return self.error is None and self.disk is not None

    def diagnostics(self) -> dict[str, t.Any]:
        return {
            'n': self.n,
            'r': self.ball.hyperbolic_radius,
            'ideal_gap': self.ideal_gap,
            'core_hausdorff': self.hausdorff_to_prev_on_core,
            'core_area': self.core_area,
            'core_area_bound': self.core_area_bound,
            'core_components': self.core_components,
            'containment': self.containment,
            'energy': self.solve.final.energy if self.solve else None,
            'iterations': self.solve.iterations if self.solve else None,
            'converged': self.solve.converged if self.solve else None,
            'error': self.error,
        }


def _warm_start(previous: TriMesh, gamma: np.ndarray) -> TriMesh:
    loop = previous.boundary_loops[0]
    old = previous.vertices[loop]
    if len(old) != len(gamma):
        raise InvalidParameterError('Warm start needs boundary curves with equal sample counts')
    spacing = float(np.mean(np.linalg.norm(gamma - np.roll(gamma, -1, axis=0), axis=1)))
    gap = float(np.max(np.linalg.norm(gamma - old, axis=1)))
    rows = max(1, math.ceil(gap / spacing))
    return extend_disk(previous, interpolate_rows(old, gamma, rows)[1:])


def run_exhaustion(
    curve: IdealCurve,
    H: float,
    radii: t.Sequence[float],
    core_radius: float,
    cfg: SolverConfig,
    hull: ShiftedHullSampler | None = None,
    on_stage: t.Callable[[ExhaustionStage], None] | None = None,
) -> list[ExhaustionStage]:
    """Solve minimizing H-disks on a growing radius schedule.

    Stops at the first failing stage and returns the stages so far, the last one
    carrying the error.
    """
    schedule = [float(r) for r in radii]
    if not schedule or any(b <= a for a, b in zip(schedule, schedule[1:], strict=False)):
        raise InvalidParameterError(f'Radius schedule must be increasing, got {schedule}')
    if not 0.0 < core_radius < schedule[0]:
        raise InvalidParameterError(
            f'Core radius {core_radius} must be positive and below the first radius {schedule[0]}'
        )
    hull = hull or supporting_halfspaces(curve, H)
    bound = 4.0 * math.pi * math.sinh(core_radius) ** 2
    stages: list[ExhaustionStage] = []
    previous: TriMesh | None = None

    for n, r in enumerate(schedule, start=1):
        ball = geodesic_ball(r)
        # warm starts rely on boundary index correspondence, so only flips and smoothing
        stage_cfg = cfg.model_copy(update={'H': H, 'ball': ball, 'target_edge_length': None})
        gamma = np.zeros((0, 3))
        band = None
        _logger.info('Exhaustion stage %d: r=%.3f H=%.3f', n, r, H)
        runtime_state.record_stage(n, r)
        try:
            band = annular_band(curve, hull, r)
            gamma = boundary_curve(curve, H, r, band=band)
            init = _warm_start(previous, gamma) if previous is not None else None
            disk, report = minimize_disk(gamma, stage_cfg, init)
        except (*_STAGE_ERRORS, RadiusTooSmallError) as exc:
            _logger.exception('Exhaustion stage %d at r=%.3f failed', n, r)
            stage = ExhaustionStage(
                n=n,
                ball=ball,
                gamma=gamma,
                band=band,
                ideal_gap=ideal_gap(gamma, curve) if len(gamma) else math.inf,
                core_area_bound=bound,
                error=f'{type(exc).__name__}: {exc}',
            )
            stages.append(stage)
            telemetry.record_stage_completed('exhaust', ok=False)
            if on_stage is not None:
                on_stage(stage)
            break

        core = core_restriction(disk, core_radius)
        components = core.connected_components()[0] if core.triangle_count else 0
        stage = ExhaustionStage(
            n=n,
            ball=ball,
            gamma=gamma,
            band=band,
            disk=disk,
            solve=report,
            hausdorff_to_prev_on_core=(
                core_hausdorff(disk, previous, core_radius) if previous is not None else None
            ),
            ideal_gap=ideal_gap(gamma, curve),
            core_area=hyperbolic_area(core) if core.triangle_count else 0.0,
            core_area_bound=bound,
            core_components=components,
            containment=float(np.max(hull.violations(disk.vertices))),
        )
        if components != 1:
            _logger.warning('Stage %d core restriction has %d components', n, components)
        stages.append(stage)
        telemetry.record_stage_completed('exhaust', ok=True)
        if on_stage is not None:
            on_stage(stage)
        previous = disk
    return stages


def nonseparating_check(disk: TriMesh, band: AnnularBand, slack: float = 1e-9) -> bool:
    """Whether the disk's boundary is null-homotopic in the band."""
    if len(disk.boundary_loops) != 1:
        raise InvalidParameterError('Nonseparating test needs a disk with one boundary loop')
    loop = disk.vertices[disk.boundary_loops[0]]
    if not np.all(band.contains(loop, slack)):
        raise InvalidParameterError('Disk boundary is not contained in the hull band')
    return band.winding(loop) == 0


def band_loop(
    band: AnnularBand, index: int, fraction: float = 0.4, segments: int = 48
) -> np.ndarray:
    """Small loop inside the band around sample ``index``, bounding a disk in the band."""
    half_width = 0.5 * fraction * float(band.widths[index])
    if half_width < 1e-9:
        raise BandError(f'Band at sample {index} is too thin for a loop ({band.widths[index]:.2e})')
    centre = 0.5 * float(band.lower[index] + band.upper[index])
    direction = band.directions[index]
    normal = band.normals[index]
    tangent = np.cross(normal, direction)
    angle = 2.0 * math.pi * np.arange(segments) / segments
    across = centre + half_width * np.sin(angle)
    along = 2.0 * half_width * np.cos(angle)
    unit = (
        direction[None, :]
        + np.tan(across)[:, None] * normal[None, :]
        + np.tan(along)[:, None] * tangent[None, :]
    )
    unit /= np.linalg.norm(unit, axis=1)[:, None]
    return band.euclidean_radius * unit


def tau_circles(
    curve: IdealCurve, offset: float = TAU_OFFSET, angular_radius: float = TAU_RADIUS
) -> tuple[RoundCircle, RoundCircle]:
    """Round circles on either side of the smooth point, each ``offset`` away from it."""
    point = curve.smooth_point()
    normal = curve.normal_at(curve.smooth_index)
    reach = angular_radius + offset
    circles = []
    for side in (1.0, -1.0):
        centre = math.cos(reach) * point + side * math.sin(reach) * normal
        circle = RoundCircle.from_axis(centre, angular_radius)
        clearance = float(polyline_angular_distance(centre[None, :], curve.points)[0])
        if clearance < angular_radius:
            _logger.warning('Barrier circle on side %+d overlaps the curve', int(side))
        circles.append(circle)
    return circles[0], circles[1]


def trace_circle(circle: RoundCircle, r: float, segments: int) -> np.ndarray:
    """Intersection of ``∂B_r`` with the geodesic plane over ``circle``."""
    radius = math.tanh(r / 2.0)
    cosine = math.cos(circle.angular_radius) * (1.0 + radius * radius) / (2.0 * radius)
    if cosine >= 1.0:
        raise RadiusTooSmallError(f'Geodesic plane over the barrier circle misses B_{r}')
    return radius * RoundCircle.from_axis(circle.axis_array, math.acos(cosine)).sample(segments)


def _fitted_axis(points: np.ndarray, inside: np.ndarray) -> np.ndarray:
    centred = points - points.mean(axis=0)
    normal = np.linalg.svd(centred, full_matrices=False)[2][-1]
    if np.dot(normal, inside) < np.mean(points @ normal):
        normal = -normal
    return normal


class CoaxialFrame(pydantic.BaseModel):
    """Isometry ``x -> R(T_{-m}(x))`` taking two disjoint equal circles to ``±z`` circles."""

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    shift: np.ndarray
    rotation: t.Any

    def forward(self, points: npt.ArrayLike) -> np.ndarray:
        moved = mobius_translation(np.asarray(points, dtype=float), -self.shift)
        return self.rotation.apply(moved.reshape(-1, 3)).reshape(moved.shape)

    def backward(self, points: npt.ArrayLike) -> np.ndarray:
        array = np.asarray(points, dtype=float)
        turned = self.rotation.inv().apply(array.reshape(-1, 3)).reshape(array.shape)
        return mobius_translation(turned, self.shift)


def coaxial_frame(first: RoundCircle, second: RoundCircle, samples: int = 64) -> CoaxialFrame:
    plus, minus = first.axis_array, second.axis_array
    bisector = plus + minus
    if np.linalg.norm(bisector) < 1e-12:
        raise BandError('Barrier circles are antipodal')
    bisector /= np.linalg.norm(bisector)
    ring = first.sample(samples)

    def tilt(depth: float) -> float:
        shift = -depth * bisector
        axis = _fitted_axis(mobius_translation(ring, shift), mobius_translation(plus, shift))
        return float(np.dot(axis, bisector))

    high = 0.5
    while tilt(high) > 0.0 and high < 0.999999:
        high = 1.0 - 0.5 * (1.0 - high)
    if tilt(high) > 0.0:
        raise BandError('Cannot centre the barrier circles')
    depth = float(brentq(tilt, 0.0, high, xtol=1e-14))
    shift = depth * bisector
    axis = _fitted_axis(mobius_translation(ring, -shift), mobius_translation(plus, -shift))
    rotation = rotation_between(axis, np.array([0.0, 0.0, 1.0]))
    return CoaxialFrame(shift=shift, rotation=rotation)


def _azimuth_matched(loop: np.ndarray, frame: CoaxialFrame, azimuths: np.ndarray) -> np.ndarray:
    image = frame.forward(loop)
    angle = np.unwrap(np.arctan2(image[:, 1], image[:, 0]))
    if angle[-1] < angle[0]:
        image, angle = image[::-1], angle[::-1]
    angle = angle - angle[0]
    period = 2.0 * math.pi
    targets = np.mod(azimuths - math.atan2(image[0, 1], image[0, 0]), period)
    matched = np.column_stack(
        [np.interp(targets, angle, image[:, k], period=period) for k in range(3)]
    )
    return frame.backward(matched)


def _snap_to_circle(
    points: np.ndarray, axis: np.ndarray, angle: float, radius: float
) -> np.ndarray:
    unit = points / np.linalg.norm(points, axis=1)[:, None]
    radial = unit - (unit @ axis)[:, None] * axis[None, :]
    radial /= np.linalg.norm(radial, axis=1)[:, None]
    return radius * (math.cos(angle) * axis[None, :] + math.sin(angle) * radial)


def barrier_annulus_init(
    first: RoundCircle, second: RoundCircle, r: float, segments: int = 64, rows: int = 12
) -> tuple[np.ndarray, np.ndarray, TriMesh]:
    """Traces of the two circles on ``∂B_r`` and a tube between them to start from."""
    frame = coaxial_frame(first, second)
    azimuths = 2.0 * math.pi * np.arange(segments) / segments
    radius = math.tanh(r / 2.0)
    loops = []
    for circle in (first, second):
        dense = trace_circle(circle, r, 8 * segments)
        matched = _azimuth_matched(dense, frame, azimuths)
        axis = circle.axis_array
        angle = float(np.mean(np.arccos(np.clip(dense @ axis / radius, -1.0, 1.0))))
        loops.append(_snap_to_circle(matched, axis, angle, radius))
    upper, lower = (frame.forward(loop) for loop in loops)
    tube = [frame.backward(row) for row in interpolate_rows(upper, lower, rows, sag=0.25)]
    tube[0], tube[-1] = loops[0], loops[1]
    return loops[0], loops[1], annulus_from_rows(tube)


def probe_length(hull: ShiftedHullSampler, axis: npt.ArrayLike) -> float:
    """Hyperbolic length of the hull chord along the diameter through ``axis``."""
    direction = np.asarray(axis, dtype=float)
    direction = direction / np.linalg.norm(direction)

    def violation(s: float) -> float:
        return float(hull.violations(s * direction)[0])

    reach = 1.0 - 1e-9
    best = minimize_scalar(violation, bounds=(-reach, reach), method='bounded')
    centre = float(best.x)
    if best.fun > 0.0:
        _logger.warning('Probe diameter misses the sampled hull by %.3e', float(best.fun))
        return 0.0
    low = -reach if violation(-reach) <= 0.0 else brentq(violation, -reach, centre, xtol=1e-14)
    high = reach if violation(reach) <= 0.0 else brentq(violation, centre, reach, xtol=1e-14)
    return float(distance(low * direction, high * direction))


class BarrierProfile(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    tau_plus: RoundCircle
    tau_minus: RoundCircle
    radii: list[float]
    distances: list[float]
    annuli: list[TriMesh] = pydantic.Field(default_factory=list, repr=False)
    probe_length: float
    r0: float | None = None
    n0: float | None = None
    truncated_at: float | None = None
    note: str | None = None

    @property
    def is_monotone(self) -> bool:
        steps = np.diff(np.asarray(self.distances, dtype=float))
        return bool(np.all(steps >= -MONOTONE_SLACK))

    def F(self, r: float) -> float:
        if r not in self.radii:
            raise InvalidParameterError(f'Radius {r} is not on the profile grid {self.radii}')
        return self.distances[self.radii.index(r)]

    def rows(self) -> list[dict[str, t.Any]]:
        return [
            {'r': r, 'F': f, 'probe_length': self.probe_length}
            for r, f in zip(self.radii, self.distances, strict=True)
        ]


def barrier_profile(
    curve: IdealCurve,
    radii: t.Sequence[float],
    cfg: SolverConfig,
    H: float = 0.0,
    hull: ShiftedHullSampler | None = None,
    offset: float = TAU_OFFSET,
    angular_radius: float = TAU_RADIUS,
    segments: int = 64,
) -> BarrierProfile:
    """``F(r) = d(O, A_r)`` for least-area annuli ``A_r`` spanning the barrier circle traces."""
    grid = sorted(float(r) for r in radii)
    tau_plus, tau_minus = tau_circles(curve, offset, angular_radius)
    hull = hull or supporting_halfspaces(curve, H)
    length = probe_length(hull, curve.axis())
    solved: list[float] = []
    distances: list[float] = []
    annuli: list[TriMesh] = []
    truncated_at = None
    note = None

    for r in grid:
        annulus_cfg = cfg.model_copy(update={'H': 0.0, 'ball': geodesic_ball(r)})
        try:
            plus, minus, init = barrier_annulus_init(tau_plus, tau_minus, r, segments)
            annulus, _ = minimize_annulus(plus, minus, annulus_cfg, init=init)
        except (*_STAGE_ERRORS, RadiusTooSmallError, BandError) as exc:
            if solved:
                truncated_at = r
                note = f'{type(exc).__name__} at r={r}: {exc}'
                _logger.warning('Barrier profile truncated at r=%.3f: %s', r, exc)
                break
            _logger.info('Barrier annulus not available at r=%.3f: %s', r, exc)
            continue
        solved.append(r)
        distances.append(float(np.min(distance_to_origin(annulus.vertices))))
        annuli.append(annulus)
        _logger.info('Barrier F(%.3f) = %.6f', r, distances[-1])

    r0 = next((r for r, f in zip(solved, distances, strict=True) if f > length), None)
    return BarrierProfile(
        tau_plus=tau_plus,
        tau_minus=tau_minus,
        radii=solved,
        distances=distances,
        annuli=annuli,
        probe_length=length,
        r0=r0,
        n0=solved[0] if solved else None,
        truncated_at=truncated_at,
        note=note,
    )
