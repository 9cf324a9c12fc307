import datetime
import enum
import importlib.metadata
import logging
import os
import pathlib
import platform
import typing as t

import numpy as np
import pandas as pd
import pydantic
import scipy
import yaml

from hplanes.mesh.model import TriMesh
from hplanes.solver import SolveReport
from hplanes.verify import CheckReport

_logger = logging.getLogger(__name__)
_REPORT_NAME_ENV = 'HPLANES_REPORT_NAME'
_DEFAULT_REPORT_NAME = 'report.yaml'
CSV_FLOAT_FORMAT = '%.12g'


def package_versions() -> dict[str, str]:
    try:
        own = importlib.metadata.version('hplanes')
    except importlib.metadata.PackageNotFoundError:
        own = 'unknown'
    return {
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'hplanes': own,
    }


class SolveRecord(pydantic.BaseModel):
    label: str
    topology: str
    H: float
    radius: float
    vertices: int
    iterations: int
    converged: bool
    termination: str
    energy: float
    area: float
    volume: float
    gradient_sup_norm: float
    neck: float | None = None

    @classmethod
    def from_solve(
        cls, label: str, mesh: TriMesh, radius: float, report: SolveReport
    ) -> 'SolveRecord':
        return cls(
            label=label,
            topology=str(mesh.topology),
            H=report.final.H,
            radius=radius,
            vertices=mesh.vertex_count,
            iterations=report.iterations,
            converged=report.converged,
            termination=str(report.termination),
            energy=report.final.energy,
            area=report.final.area,
            volume=report.final.volume,
            gradient_sup_norm=report.final.gradient_sup_norm,
            neck=report.neck,
        )


class RunReport(pydantic.BaseModel):
    command: str
    config: dict[str, t.Any]
    versions: dict[str, str] = pydantic.Field(default_factory=package_versions)
    seed: int
    threads: int
    started_at: datetime.datetime = pydantic.Field(
        default_factory=lambda: datetime.datetime.now(datetime.UTC)
    )
    finished_at: datetime.datetime | None = None
    checks: list[CheckReport] = pydantic.Field(default_factory=list)
    solves: list[SolveRecord] = pydantic.Field(default_factory=list)
    stages: list[dict[str, t.Any]] = pydantic.Field(default_factory=list)
    errors: list[str] = pydantic.Field(default_factory=list)
    artifacts: list[str] = pydantic.Field(default_factory=list)
    exit_code: int | None = None

    @property
    def checks_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def finish(self, exit_code: int) -> None:
        self.exit_code = exit_code
        self.finished_at = datetime.datetime.now(datetime.UTC)


def _plain(value: t.Any) -> t.Any:
    """Reduce a python-mode dump to what ``yaml.safe_dump`` represents; floats keep inf."""
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, list | tuple):
        return [_plain(item) for item in value]
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, np.generic):
        return value.item()
    return value


class RunReportStore:
    def __init__(self, path: pathlib.Path) -> None:
        self.path = path

    @classmethod
    def in_directory(cls, directory: pathlib.Path) -> 'RunReportStore':
        name = os.environ.get(_REPORT_NAME_ENV, _DEFAULT_REPORT_NAME)
        return cls(directory / name)

    def save(self, report: RunReport) -> None:
        payload = _plain(report.model_dump())
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            tmp_path = self.path.with_suffix(f'{self.path.suffix}.tmp')
            tmp_path.write_text(yaml.safe_dump(payload, sort_keys=False), encoding='utf-8')
            tmp_path.replace(self.path)
        except OSError:
            _logger.exception('Failed to write run report to %s', self.path)

    def load(self) -> RunReport | None:
        if not self.path.exists():
            return None

        try:
            payload = yaml.safe_load(self.path.read_text(encoding='utf-8'))
        except (OSError, yaml.YAMLError):
            _logger.exception('Failed to read run report from %s', self.path)
            return None

        try:
            return RunReport.model_validate(payload)
        except pydantic.ValidationError:
            _logger.error('Run report in %s is invalid', self.path)
            return None


def write_diagnostics_csv(
    path: pathlib.Path,
    rows: t.Sequence[t.Mapping[str, t.Any]],
    columns: t.Sequence[str] | None = None,
) -> None:
    """CSV with a header row; floats use a fixed format so reruns compare byte for byte."""
    frame = pd.DataFrame(list(rows), columns=list(columns) if columns is not None else None)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
    _logger.debug('Wrote %d diagnostic rows to %s', len(frame), path)
