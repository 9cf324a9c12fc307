import os
import types

import pytest
import yaml

from hplanes import cli
from hplanes.config import parse_config
from hplanes.mesh.obj import read_obj
from hplanes.report import RunReportStore
from hplanes.solver import SolverError
from hplanes.umbilic import cap_mesh, round_curve_cap
from hplanes.verify import CheckReport

SMALL_SOLVE = """\
command: solve
H: 0.0
radius: 1.0
curve:
  sample_count: 48
solver:
  max_iterations: 20
exhaustion:
  radii: [1.0, 1.5]
  core_radius: 0.5
  hull_samples: 16
"""


def _config(tmp_path, text: str = SMALL_SOLVE):
    return parse_config(f'{text}output_dir: {tmp_path / "out"}\n')


def _load_report(tmp_path):
    report = RunReportStore.in_directory(tmp_path / 'out').load()
    assert report is not None
    return report


def test__cli__small_solve_writes_artifacts(tmp_path):
    exit_code = cli.run(_config(tmp_path))

    out = tmp_path / 'out'
    assert exit_code == cli.EXIT_OK
    mesh = read_obj(out / 'disk.obj')
    assert len(mesh.boundary_loops) == 1
    assert (out / 'diagnostics.csv').read_text(encoding='utf-8').startswith('iteration,energy,step')
    report = _load_report(tmp_path)
    assert report.exit_code == cli.EXIT_OK
    assert report.solves[0].label == 'disk'
    assert report.solves[0].radius == 1.0
    assert sorted(report.artifacts) == [str(out / 'diagnostics.csv'), str(out / 'disk.obj')]


def test__cli__solver_errors_exit_with_code_two(tmp_path, monkeypatch, capsys):
    def diverge(self):
        raise SolverError('line search broke down')

    monkeypatch.setattr(cli._Run, 'solve', diverge)

    exit_code = cli.run(_config(tmp_path))

    assert exit_code == cli.EXIT_SOLVER
    assert 'Error: line search broke down' in capsys.readouterr().err
    report = _load_report(tmp_path)
    assert report.exit_code == cli.EXIT_SOLVER
    assert report.errors == ['SolverError: line search broke down']


def test__cli__validation_errors_exit_with_code_one(tmp_path, monkeypatch, capsys):
    def reject(self):
        raise ValueError('boundary leaves the ball')

    monkeypatch.setattr(cli._Run, 'solve', reject)

    assert cli.run(_config(tmp_path)) == cli.EXIT_VALIDATION
    assert 'Error: boundary leaves the ball' in capsys.readouterr().err


def test__cli__failed_checks_exit_with_code_three(tmp_path, monkeypatch):
    def fail_check(self):
        self.report.checks.append(CheckReport.measure('containment', 0.5, 1e-3))

    monkeypatch.setattr(cli._Run, 'solve', fail_check)

    assert cli.run(_config(tmp_path)) == cli.EXIT_VERIFICATION
    assert not _load_report(tmp_path).checks_passed


def test__cli__main_rejects_invalid_config(tmp_path, monkeypatch, capsys):
    path = tmp_path / 'run.yaml'
    path.write_text('command: solve\nH: 2.0\n', encoding='utf-8')
    monkeypatch.setattr('sys.argv', ['hplanes', '--config', str(path)])

    with pytest.raises(SystemExit) as exc_info:
        cli.main()

    assert exc_info.value.code == cli.EXIT_VALIDATION
    assert 'Error: line 2 H' in capsys.readouterr().err


def test__cli__main_rejects_missing_config(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr('sys.argv', ['hplanes', '--config', str(tmp_path / 'missing.yaml')])

    with pytest.raises(SystemExit) as exc_info:
        cli.main()

    assert exc_info.value.code == cli.EXIT_VALIDATION
    assert capsys.readouterr().err.startswith('Error: ')


def test__cli__main_applies_overrides(tmp_path, monkeypatch):
    path = tmp_path / 'run.yaml'
    path.write_text(SMALL_SOLVE, encoding='utf-8')
    seen = []

    def fake_run(cfg):
        seen.append(cfg)
        return cli.EXIT_OK

    monkeypatch.setattr(cli, 'run', fake_run)
    monkeypatch.setattr(cli, 'limit_threads', lambda threads: None)
    monkeypatch.setattr(
        'sys.argv',
        [
            'hplanes',
            '--config',
            str(path),
            '--out',
            str(tmp_path / 'elsewhere'),
            '--seed',
            '7',
            '--threads',
            '3',
        ],
    )

    with pytest.raises(SystemExit) as exc_info:
        cli.main()

    assert exc_info.value.code == cli.EXIT_OK
    (cfg,) = seen
    assert cfg.output_dir == str(tmp_path / 'elsewhere')
    assert cfg.seed == 7
    assert cfg.threads == 3
    assert cfg.solver.max_iterations == 20


def test__cli__override_validation_raises_config_error(tmp_path):
    path = tmp_path / 'run.yaml'
    path.write_text(SMALL_SOLVE, encoding='utf-8')

    with pytest.raises(cli.ConfigError):
        cli.load_config(path, {'threads': 0})


def test__cli__limit_threads_sets_pool_sizes(monkeypatch):
    calls = []
    monkeypatch.setattr(cli, 'threadpool_limits', lambda limits=None: calls.append(limits))
    for name in ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS'):
        monkeypatch.setenv(name, '1')

    cli.limit_threads(2)

    assert calls == [2]
    assert os.environ['OMP_NUM_THREADS'] == '2'
    assert os.environ['MKL_NUM_THREADS'] == '2'


def test__cli__report_is_plain_yaml(tmp_path, monkeypatch):
    monkeypatch.setattr(cli._Run, 'solve', lambda self: None)

    cli.run(_config(tmp_path))

    payload = yaml.safe_load((tmp_path / 'out' / 'report.yaml').read_text(encoding='utf-8'))
    assert payload['command'] == 'solve'
    assert payload['config']['solver']['max_iterations'] == 20
    assert payload['exit_code'] == 0


def _cap_exhaustion(monkeypatch, calls):
    def fake_exhaust(self, curve, H, hull=None, label=''):
        calls.append((H, label))
        return [types.SimpleNamespace(disk=cap_mesh(round_curve_cap(curve, H), 2.0, rings=12))]

    monkeypatch.setattr(cli._Run, 'exhaust', fake_exhaust)


def test__cli__pair_checks_both_signs(tmp_path, monkeypatch):
    calls = []
    _cap_exhaustion(monkeypatch, calls)
    cfg = _config(tmp_path, 'command: pair\nH: 0.3\ncurve:\n  sample_count: 64\n')

    exit_code = cli.run(cfg)

    assert exit_code == cli.EXIT_OK
    assert sorted(calls) == [(-0.3, 'H-0.300'), (0.3, 'H+0.300')]
    assert (tmp_path / 'out' / 'plus.obj').exists()
    assert (tmp_path / 'out' / 'minus.obj').exists()
    assert [check.name for check in _load_report(tmp_path).checks] == ['pair_planes']


def test__cli__sweep_writes_each_surface(tmp_path, monkeypatch):
    calls = []
    _cap_exhaustion(monkeypatch, calls)
    monkeypatch.setattr(cli._Run, '_basins', lambda self, curve, H: {'H': H, 'agree': True})
    text = (
        'command: sweep\nH_values: [0.3, -0.3, 0.0]\ncurve:\n  sample_count: 64\n'
        'exhaustion:\n  radii: [1.0, 2.5]\n  core_radius: 0.5\n'
    )

    exit_code = cli.run(_config(tmp_path, text))

    out = tmp_path / 'out'
    assert exit_code == cli.EXIT_OK
    assert len(calls) == 3
    assert (out / 'sweep_H-0.300.obj').exists()
    assert (out / 'basins.csv').read_text(encoding='utf-8').splitlines()[0] == 'H,agree'
    assert _load_report(tmp_path).checks[0].name == 'foliation'


def test__cli__verify_checks_containment_with_the_configured_tolerance(tmp_path, monkeypatch):
    _cap_exhaustion(monkeypatch, [])
    text = (
        'command: verify\nH: 0.3\ncurve:\n  sample_count: 64\n'
        'exhaustion:\n  radii: [1.0, 2.0]\n  core_radius: 0.5\n  hull_samples: 16\n'
        '  containment_tolerance: 0.05\n'
    )

    cli.run(_config(tmp_path, text))

    checks = {check.name: check for check in _load_report(tmp_path).checks}
    assert checks['containment'].tolerance == 0.05
    assert checks['containment'].passed
    assert checks['maximum_principle'].tolerance == 1e-3
