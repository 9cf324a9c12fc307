import math

import yaml

from hplanes.report import (
    RunReport,
    RunReportStore,
    SolveRecord,
    package_versions,
    write_diagnostics_csv,
)
from hplanes.verify import CheckReport


def _solve_record() -> SolveRecord:
    return SolveRecord(
        label='disk',
        topology='disk',
        H=0.3,
        radius=3.0,
        vertices=217,
        iterations=120,
        converged=True,
        termination='gradient',
        energy=2.5,
        area=3.1,
        volume=-1.0,
        gradient_sup_norm=4e-6,
    )


def test_run_report_store_roundtrip(tmp_path):
    store = RunReportStore(tmp_path / 'report.yaml')
    report = RunReport(command='solve', config={'command': 'solve', 'H': 0.3}, seed=0, threads=1)
    report.solves.append(_solve_record())
    report.checks.append(
        CheckReport(name='pair_planes', passed=False, violation=math.inf, tolerance=1e-3)
    )
    report.finish(3)

    store.save(report)
    loaded = store.load()

    assert loaded is not None
    assert loaded.exit_code == 3
    assert loaded.finished_at is not None
    assert loaded.config == {'command': 'solve', 'H': 0.3}
    assert loaded.solves[0].vertices == 217
    assert loaded.checks[0].violation == math.inf
    assert not loaded.checks_passed
    assert not (tmp_path / 'report.yaml.tmp').exists()


def test_run_report_records_versions():
    versions = package_versions()

    assert set(versions) == {'python', 'numpy', 'scipy', 'hplanes'}
    assert RunReport(command='verify', config={}, seed=1, threads=2).versions == versions


def test_run_report_store_missing_file_returns_none(tmp_path):
    assert RunReportStore(tmp_path / 'report.yaml').load() is None


def test_run_report_store_invalid_payload_returns_none(tmp_path):
    path = tmp_path / 'report.yaml'
    path.write_text(yaml.safe_dump({'invalid': True}), encoding='utf-8')

    assert RunReportStore(path).load() is None


def test_run_report_store_corrupt_yaml_returns_none(tmp_path):
    path = tmp_path / 'report.yaml'
    path.write_text('command: [solve\n', encoding='utf-8')

    assert RunReportStore(path).load() is None


def test_run_report_store_swallows_write_errors(tmp_path):
    blocker = tmp_path / 'blocker'
    blocker.write_text('', encoding='utf-8')
    store = RunReportStore(blocker / 'report.yaml')

    store.save(RunReport(command='solve', config={}, seed=0, threads=1))

    assert store.load() is None


def test_run_report_store_name_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv('HPLANES_REPORT_NAME', 'custom.yaml')

    assert RunReportStore.in_directory(tmp_path).path == tmp_path / 'custom.yaml'


def test_diagnostics_csv_uses_fixed_float_format(tmp_path):
    path = tmp_path / 'nested' / 'barrier.csv'

    write_diagnostics_csv(path, [{'r': 2.0, 'F': 1.0 / 3.0}, {'r': 3.0, 'F': None}], ['r', 'F'])

    assert path.read_text(encoding='utf-8') == 'r,F\n2,0.333333333333\n3,\n'
