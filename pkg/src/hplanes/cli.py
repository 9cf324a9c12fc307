import argparse
import concurrent.futures
import logging
import math
import os
import pathlib
import sys
import typing as t

import daiquiri
import numpy as np
from threadpoolctl import threadpool_limits

from hplanes.acceptance import run_acceptance
from hplanes.catenoid import coaxial_annulus, coaxial_circles
from hplanes.config import Command, ConfigError, RunConfig, parse_config
from hplanes.curves import IdealCurve, RoundCircle, angle_between
from hplanes.exhaustion import ExhaustionStage, boundary_curve, core_hausdorff, run_exhaustion
from hplanes.mesh.generators import cone_fill
from hplanes.mesh.model import TriMesh
from hplanes.mesh.obj import write_obj
from hplanes.mesh.remesh import RemeshingError
from hplanes.report import RunReport, RunReportStore, SolveRecord, write_diagnostics_csv
from hplanes.runtime_state import runtime_state
from hplanes.solver import SolveReport, SolverError, minimize_annulus, minimize_disk
from hplanes.umbilic import ShiftedHullSampler, supporting_halfspaces, umbilic_cap
from hplanes.verify import (
    CheckReport,
    barrier_family,
    check_containment,
    check_embedded,
    check_maximum_principle,
    foliation_sweep,
    graph_near_infinity,
    pair_planes,
)

_logger = logging.getLogger(__name__)
_THREAD_ENV_VARS = ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS')
_BASIN_TOLERANCE = 1e-6

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_VERIFICATION = 3


def setup_logging(verbose: bool = False) -> None:
    daiquiri.setup(level=logging.DEBUG if verbose else logging.INFO)
    daiquiri.set_default_log_levels(
        [
            ('opentelemetry', 'INFO'),
            ('urllib3.connectionpool', 'INFO'),
        ]
    )


def limit_threads(threads: int) -> None:
    """Cap the BLAS and OpenMP pools, both loaded ones and those of child processes."""
    for name in _THREAD_ENV_VARS:
        os.environ[name] = str(threads)
    threadpool_limits(limits=threads)
    _logger.debug('Capped native thread pools at %d', threads)


class _Run:
    """One command invocation: its output directory and the report it fills."""

    def __init__(self, cfg: RunConfig) -> None:
        self.cfg = cfg
        self.out = pathlib.Path(cfg.output_dir)
        self.report = RunReport(
            command=str(cfg.command),
            config=cfg.model_dump(mode='json'),
            seed=cfg.seed,
            threads=cfg.threads,
        )

    def curve(self) -> IdealCurve:
        curve = self.cfg.curve.build()
        _logger.info('Curve %s with %d samples', curve.name, len(curve))
        return curve

    def write_mesh(self, name: str, mesh: TriMesh, header: str | None = None) -> None:
        path = self.out / name
        write_obj(path, mesh, header=header or name)
        self.report.artifacts.append(str(path))

    def write_csv(
        self,
        name: str,
        rows: t.Sequence[t.Mapping[str, t.Any]],
        columns: t.Sequence[str] | None = None,
    ) -> None:
        path = self.out / name
        write_diagnostics_csv(path, rows, columns)
        self.report.artifacts.append(str(path))

    def record_solve(self, label: str, mesh: TriMesh, radius: float, solve: SolveReport) -> None:
        self.report.solves.append(SolveRecord.from_solve(label, mesh, radius, solve))

    def exhaust(
        self, curve: IdealCurve, H: float, hull: ShiftedHullSampler | None = None, label: str = ''
    ) -> list[ExhaustionStage]:
        cfg = self.cfg
        prefix = f'{label}_' if label else ''

        def on_stage(stage: ExhaustionStage) -> None:
            if stage.disk is not None:
                self.write_mesh(f'{prefix}stage_{stage.n}.obj', stage.disk)

        stages = run_exhaustion(
            curve,
            H,
            cfg.exhaustion.radii,
            cfg.exhaustion.core_radius,
            cfg.solver_config(H, cfg.exhaustion.radii[0]),
            hull=hull,
            on_stage=on_stage,
        )
        rows = [stage.diagnostics() for stage in stages]
        self.report.stages.extend({'label': label or None, **row} for row in rows)
        self.write_csv(f'{prefix}diagnostics.csv', rows)
        last = stages[-1]
        if last.disk is not None and last.solve is not None:
            self.record_solve(
                f'{prefix}stage_{last.n}', last.disk, last.ball.hyperbolic_radius, last.solve
            )
        if not last.ok or last.disk is None:
            raise SolverError(
                f'Exhaustion stage {last.n} at r={last.ball.hyperbolic_radius} failed: {last.error}'
            )
        return stages

    def solve(self) -> None:
        cfg = self.cfg
        curve = self.curve()
        hull = supporting_halfspaces(curve, cfg.H, cfg.exhaustion.hull_samples)
        gamma = boundary_curve(curve, cfg.H, cfg.radius, hull)
        disk, solve = minimize_disk(gamma, cfg.solver_config())
        self.record_solve('disk', disk, cfg.radius, solve)
        self.write_mesh('disk.obj', disk)
        self.write_csv('diagnostics.csv', _history_rows(solve))

    def annulus(self) -> None:
        cfg = self.cfg
        section = cfg.annulus
        upper, lower = coaxial_circles(
            section.circle_height, section.circle_radius, section.segments
        )
        mesh, solve = minimize_annulus(upper, lower, cfg.solver_config(H=0.0), rows=section.rows)
        self.record_solve('annulus', mesh, cfg.radius, solve)
        self.write_mesh('annulus.obj', mesh)
        self.write_csv('diagnostics.csv', _history_rows(solve))

        profile = coaxial_annulus(section.circle_height, section.circle_radius)
        rho = profile.neck_radius
        exact = 2.0 * math.pi * rho * 2.0 / (1.0 - rho * rho)
        self.report.checks.append(
            CheckReport.measure(
                'annulus_neck',
                abs((solve.neck or 0.0) - exact) / exact,
                0.05,
                measurements={'neck': solve.neck or 0.0, 'rotational_neck': exact},
            )
        )

    def pair(self) -> None:
        cfg = self.cfg
        curve = self.curve()
        surfaces = self._in_parallel(curve, (cfg.H, -cfg.H))
        plus, minus, check = pair_planes(
            curve,
            cfg.H,
            cfg.solver_config(),
            cfg.exhaustion.radii,
            cfg.exhaustion.core_radius,
            cfg.verify.contact_tolerance,
            surfaces=(surfaces[cfg.H], surfaces[-cfg.H]),
        )
        self.write_mesh('plus.obj', plus, header=f'H=+{cfg.H}')
        self.write_mesh('minus.obj', minus, header=f'H=-{cfg.H}')
        self.report.checks.append(check)

    def sweep(self) -> None:
        cfg = self.cfg
        curve = self.curve()
        surfaces = self._in_parallel(curve, cfg.H_values)
        for H, disk in sorted(surfaces.items()):
            self.write_mesh(f'sweep_H{H:+.3f}.obj', disk, header=f'H={H}')
        self.report.checks.append(
            foliation_sweep(
                curve,
                cfg.H_values,
                cfg.solver_config(),
                cfg.exhaustion.radii,
                cfg.exhaustion.core_radius,
                cfg.verify.contact_tolerance,
                surfaces=surfaces,
            )
        )
        self.write_csv('basins.csv', [self._basins(curve, H) for H in cfg.H_values])

    def _in_parallel(self, curve: IdealCurve, H_values: t.Iterable[float]) -> dict[float, TriMesh]:
        """Final-stage disks for each H, one exhaustion per worker thread."""
        values = sorted({float(H) for H in H_values})
        with concurrent.futures.ThreadPoolExecutor(max_workers=self.cfg.threads) as executor:
            futures = {
                H: executor.submit(self.exhaust, curve, H, None, f'H{H:+.3f}') for H in values
            }
            return {H: future.result()[-1].disk for H, future in futures.items()}

    def _basins(self, curve: IdealCurve, H: float) -> dict[str, t.Any]:
        """Solve the first stage from a cone and from a cap start; report whether they agree."""
        cfg = self.cfg
        r = cfg.exhaustion.radii[0]
        hull = supporting_halfspaces(curve, H, cfg.exhaustion.hull_samples)
        gamma = boundary_curve(curve, H, r, hull)
        solver_cfg = cfg.solver_config(H, r)
        axis = curve.axis()
        spread = float(np.mean(angle_between(curve.points, axis)))
        cap = umbilic_cap(RoundCircle.from_axis(axis, spread), H)
        cone, cone_solve = minimize_disk(gamma, solver_cfg)
        capped, cap_solve = minimize_disk(gamma, solver_cfg, init=cone_fill(gamma, apex=cap.apex))
        energy_gap = abs(cone_solve.final.energy - cap_solve.final.energy)
        distance = core_hausdorff(cone, capped, cfg.exhaustion.core_radius)
        agree = energy_gap <= _BASIN_TOLERANCE * max(1.0, abs(cone_solve.final.energy)) and (
            distance <= cfg.verify.contact_tolerance
        )
        if not agree:
            _logger.warning(
                'H=%.3f: cone and cap starts settle apart (energy gap %.3e, distance %.3e)',
                H,
                energy_gap,
                distance,
            )
        return {
            'H': H,
            'radius': r,
            'cone_energy': cone_solve.final.energy,
            'cap_energy': cap_solve.final.energy,
            'core_distance': distance,
            'agree': agree,
        }

    def exhaust_command(self) -> None:
        self.exhaust(self.curve(), self.cfg.H)

    def verify(self) -> None:
        cfg = self.cfg
        curve = self.curve()
        hull = supporting_halfspaces(curve, cfg.H, cfg.exhaustion.hull_samples)
        disk = t.cast(TriMesh, self.exhaust(curve, cfg.H, hull)[-1].disk)
        tol = cfg.verify.contact_tolerance
        checks = [
            check_containment(
                disk,
                curve,
                cfg.H,
                cfg.exhaustion.hull_samples,
                cfg.exhaustion.containment_tolerance,
                hull=hull,
            ),
            check_embedded(disk),
            graph_near_infinity(disk, curve, cfg.verify.rho, cfg.verify.graph_bins),
        ]
        axis = curve.axis()
        for direction in (axis, -axis):
            family = barrier_family(curve, direction, cfg.H, cfg.verify.barrier_steps)
            checks.append(check_maximum_principle(disk, family, tol))
        self.report.checks.extend(checks)

    def accept(self) -> None:
        self.report.checks.extend(run_acceptance(self.cfg, self.out))
        produced = [*self.out.glob('*.obj'), *self.out.glob('*.csv')]
        self.report.artifacts.extend(str(path) for path in sorted(produced))

    def dispatch(self) -> None:
        handlers: dict[Command, t.Callable[[], None]] = {
            Command.SOLVE: self.solve,
            Command.ANNULUS: self.annulus,
            Command.PAIR: self.pair,
            Command.SWEEP: self.sweep,
            Command.EXHAUST: self.exhaust_command,
            Command.VERIFY: self.verify,
            Command.ACCEPT: self.accept,
        }
        handlers[self.cfg.command]()


def _history_rows(solve: SolveReport) -> list[dict[str, float]]:
    steps = [math.nan, *solve.step_sizes]
    return [
        {'iteration': i, 'energy': energy, 'step': steps[i] if i < len(steps) else math.nan}
        for i, energy in enumerate(solve.energy_history)
    ]


def _fail(current: _Run, error: Exception) -> None:
    message = str(error) or error.__class__.__name__
    print(f'Error: {message}', file=sys.stderr)
    current.report.errors.append(f'{error.__class__.__name__}: {message}')
    runtime_state.record_error(message)


def run(cfg: RunConfig) -> int:
    """Execute ``cfg.command``; artifacts and the run report land in ``cfg.output_dir``."""
    current = _Run(cfg)
    current.out.mkdir(parents=True, exist_ok=True)
    runtime_state.record_command_start(str(cfg.command))
    _logger.info(
        'Running %s into %s (seed %d, %d threads)', cfg.command, current.out, cfg.seed, cfg.threads
    )

    try:
        current.dispatch()
    except (SolverError, RemeshingError) as e:
        _fail(current, e)
        exit_code = EXIT_SOLVER
    except ValueError as e:
        _fail(current, e)
        exit_code = EXIT_VALIDATION
    else:
        exit_code = EXIT_OK if current.report.checks_passed else EXIT_VERIFICATION

    failed = [check.name for check in current.report.checks if not check.passed]
    if failed:
        _logger.warning('Failed checks: %s', ', '.join(failed))
    # worker threads append in completion order
    current.report.artifacts.sort()
    current.report.stages.sort(key=lambda row: (row.get('label') or '', row.get('n', 0)))
    current.report.finish(exit_code)
    RunReportStore.in_directory(current.out).save(current.report)
    _logger.info('%s finished with exit code %d', cfg.command, exit_code)
    return exit_code


def load_config(path: pathlib.Path, overrides: dict[str, t.Any]) -> RunConfig:
    cfg = parse_config(path.read_text(encoding='utf-8'))
    if not overrides:
        return cfg
    return parse_config_dict({**cfg.model_dump(mode='json'), **overrides})


def parse_config_dict(payload: dict[str, t.Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(payload)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def main() -> None:
    parser = argparse.ArgumentParser(
        description='Construct minimizing H-planes in hyperbolic space'
    )
    parser.add_argument('--config', type=pathlib.Path, required=True, help='YAML run configuration')
    parser.add_argument('--out', type=str, help='Output directory (overrides output_dir)')
    parser.add_argument('--seed', type=int, help='Random seed (overrides seed)')
    parser.add_argument('--threads', type=int, help='Worker threads (overrides threads)')
    parser.add_argument('--verbose', action='store_true', help='Log at DEBUG level')
    args = parser.parse_args()

    setup_logging(args.verbose)
    overrides = {
        key: value
        for key, value in (('output_dir', args.out), ('seed', args.seed), ('threads', args.threads))
        if value is not None
    }
    try:
        cfg = load_config(args.config, overrides)
    except (OSError, ConfigError) as e:
        print(f'Error: {e}', file=sys.stderr)
        sys.exit(EXIT_VALIDATION)

    limit_threads(cfg.threads)
    sys.exit(run(cfg))


if __name__ == '__main__':  # pragma: no cover
    main()
