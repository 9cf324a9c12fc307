"""Run configuration: a YAML document validated into frozen pydantic sections."""

import enum
import logging
import math
import typing as t

import pydantic
import yaml

from hplanes.curves import CurveKind, IdealCurve, build_curve, normalize_curve
from hplanes.exhaustion import TAU_OFFSET, TAU_RADIUS
from hplanes.hyperbolic import geodesic_ball
from hplanes.solver import Descent, SolverConfig
from hplanes.verify import CONTACT_TOLERANCE, GRAPH_BINS

_logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None) -> None:
        location = ' '.join(
            part for part in (f'line {line}' if line else '', field or '') if part
        )
        super().__init__(f'{location}: {message}' if location else message)
        self.line = line
        self.field = field


class Command(enum.StrEnum):
    SOLVE = 'solve'
    ANNULUS = 'annulus'
    PAIR = 'pair'
    SWEEP = 'sweep'
    EXHAUST = 'exhaust'
    VERIFY = 'verify'
    ACCEPT = 'accept'


def _check_mean_curvature(value: float) -> float:
    if not -1.0 < value < 1.0:
        raise ValueError(f'H = {value} must lie in the open interval (-1, 1)')
    return value


MeanCurvature = t.Annotated[float, pydantic.AfterValidator(_check_mean_curvature)]


class _Section(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra='forbid', frozen=True)


class CurveSection(_Section):
    kind: CurveKind = CurveKind.CIRCLE
    sample_count: int = pydantic.Field(default=256, ge=16)
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    angular_radius: float = pydantic.Field(default=math.pi / 2, gt=0.0, lt=math.pi)
    semi_axes: tuple[float, float] = (1.75, 1.35)
    coefficients: tuple[float, ...] = ()
    smooth_index: int = pydantic.Field(default=0, ge=0)
    normalize: bool = True

    @pydantic.model_validator(mode='after')
    def check_kind(self) -> 'CurveSection':
        if self.kind == CurveKind.FOURIER and not self.coefficients:
            raise ValueError('A fourier curve needs at least one coefficient')
        if self.smooth_index >= self.sample_count:
            raise ValueError(
                f'smooth_index {self.smooth_index} is not below sample_count {self.sample_count}'
            )
        return self

    def build(self) -> IdealCurve:
        curve = build_curve(
            self.kind,
            self.sample_count,
            axis=self.axis,
            angular_radius=self.angular_radius,
            semi_axes=self.semi_axes,
            coefficients=self.coefficients,
            smooth_index=self.smooth_index,
        )
        if self.normalize:
            curve, _ = normalize_curve(curve)
        return curve


class SolverSection(_Section):
    max_iterations: int = pydantic.Field(default=400, ge=0)
    gradient_tolerance: float = pydantic.Field(default=1e-5, gt=0.0)
    backtracking_factor: float = pydantic.Field(default=0.5, gt=0.0, lt=1.0)
    sufficient_decrease: float = pydantic.Field(default=1e-4, gt=0.0, lt=1.0)
    remesh_every: int = pydantic.Field(default=50, ge=0)
    target_edge_length: float | None = pydantic.Field(default=None, gt=0.0)
    quadrature_order: t.Literal[1, 2, 4, 5] = 2
    descent: Descent = Descent.PRECONDITIONED

    def solver_config(self, H: float, radius: float) -> SolverConfig:
        return SolverConfig(
            H=H,
            ball=geodesic_ball(radius),
            **self.model_dump(),
        )


class ExhaustionSection(_Section):
    radii: tuple[float, ...] = (2.0, 3.0, 4.0, 5.0, 6.0)
    core_radius: float = pydantic.Field(default=1.5, gt=0.0)
    hull_samples: int = pydantic.Field(default=64, ge=4)
    containment_tolerance: float = pydantic.Field(default=1e-3, ge=0.0)

    @pydantic.model_validator(mode='after')
    def check_schedule(self) -> 'ExhaustionSection':
        if not self.radii:
            raise ValueError('Radius schedule is empty')
        if any(b <= a for a, b in zip(self.radii, self.radii[1:], strict=False)):
            raise ValueError(f'Radius schedule {list(self.radii)} must be strictly increasing')
        if self.core_radius >= self.radii[0]:
            raise ValueError(
                f'core_radius {self.core_radius} must stay below the first radius {self.radii[0]}'
            )
        return self


class VerifySection(_Section):
    contact_tolerance: float = pydantic.Field(default=CONTACT_TOLERANCE, ge=0.0)
    graph_bins: tuple[int, int] = GRAPH_BINS
    rho: float = pydantic.Field(default=0.25, gt=0.0)
    barrier_steps: int = pydantic.Field(default=48, ge=2)


class BarrierSection(_Section):
    radii: tuple[float, ...] = (2.0, 2.5, 3.0, 3.5, 4.0)
    tau_offset: float = pydantic.Field(default=TAU_OFFSET, gt=0.0)
    tau_radius: float = pydantic.Field(default=TAU_RADIUS, gt=0.0, lt=math.pi / 2)
    segments: int = pydantic.Field(default=64, ge=8)


class AnnulusSection(_Section):
    circle_height: float = pydantic.Field(default=0.3, gt=0.0)
    circle_radius: float = pydantic.Field(default=0.6, gt=0.0)
    segments: int = pydantic.Field(default=64, ge=8)
    rows: int = pydantic.Field(default=12, ge=2)

    @pydantic.model_validator(mode='after')
    def check_inside_ball(self) -> 'AnnulusSection':
        if self.circle_height**2 + self.circle_radius**2 >= 1.0:
            raise ValueError('Annulus boundary circles must lie inside the unit ball')
        return self


class RunConfig(_Section):
    command: Command
    curve: CurveSection = CurveSection()
    H: MeanCurvature = 0.0
    H_values: tuple[MeanCurvature, ...] = ()
    radius: float = pydantic.Field(default=3.0, gt=0.0)
    solver: SolverSection = SolverSection()
    exhaustion: ExhaustionSection = ExhaustionSection()
    verify: VerifySection = VerifySection()
    barrier: BarrierSection = BarrierSection()
    annulus: AnnulusSection = AnnulusSection()
    output_dir: str = 'out'
    seed: int = pydantic.Field(default=0, ge=0)
    threads: int = pydantic.Field(default=1, ge=1)

    @pydantic.model_validator(mode='after')
    def check_command(self) -> 'RunConfig':
        if self.command == Command.PAIR and not 0.0 < self.H < 1.0:
            raise ValueError(f'pair needs 0 < H < 1, got H = {self.H}')
        if self.command == Command.SWEEP and not self.H_values:
            raise ValueError('sweep needs a non-empty H_values list')
        return self

    def solver_config(self, H: float | None = None, radius: float | None = None) -> SolverConfig:
        return self.solver.solver_config(
            self.H if H is None else H, self.radius if radius is None else radius
        )


def _line_of(text: str, loc: t.Sequence[int | str]) -> int | None:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return None
    line = None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            child = next((value for name, value in node.value if name.value == str(key)), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            child = node.value[key]
        else:
            child = None
        if child is None:
            break
        node = child
        line = node.start_mark.line + 1
    return line


def parse_config(text: str) -> RunConfig:
    try:
        payload = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, 'problem_mark', None)
        raise ConfigError(
            f'invalid YAML: {getattr(exc, "problem", exc)}',
            line=mark.line + 1 if mark is not None else None,
        ) from exc
    if not isinstance(payload, dict):
        raise ConfigError('configuration must be a mapping')

    try:
        cfg = RunConfig.model_validate(payload)
    except pydantic.ValidationError as exc:
        error = exc.errors()[0]
        loc = [part for part in error['loc'] if not str(part).startswith('function-')]
        field = '.'.join(str(part) for part in loc) or None
        raise ConfigError(error['msg'], line=_line_of(text, loc), field=field) from exc
    _logger.debug('Parsed %s configuration', cfg.command)
    return cfg


def emit_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode='json'), sort_keys=False)
