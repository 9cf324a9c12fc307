import pathlib

import pytest

from hplanes.config import Command, ConfigError, RunConfig, emit_config, parse_config
from hplanes.curves import CurveKind
from hplanes.solver import Descent

SOLVE_YAML = """\
command: solve
H: 0.25
radius: 2.5
curve:
  kind: fourier
  coefficients: [0.15, 0.1]
  sample_count: 128
solver:
  max_iterations: 80
  descent: euclidean
"""


def test__config__parse_solve_document():
    cfg = parse_config(SOLVE_YAML)

    assert cfg.command == Command.SOLVE
    assert cfg.curve.kind == CurveKind.FOURIER
    assert cfg.curve.coefficients == (0.15, 0.1)
    assert cfg.solver.descent == Descent.EUCLIDEAN
    assert cfg.exhaustion.radii == (2.0, 3.0, 4.0, 5.0, 6.0)


def test__config__solver_config_carries_run_settings():
    cfg = parse_config(SOLVE_YAML)

    solver = cfg.solver_config()
    other = cfg.solver_config(H=-0.5, radius=4.0)

    assert solver.H == 0.25
    assert solver.ball.hyperbolic_radius == 2.5
    assert solver.max_iterations == 80
    assert other.H == -0.5
    assert other.ball.hyperbolic_radius == 4.0
    assert 'seed' not in type(solver).model_fields


def test__config__emitted_yaml_parses_back():
    cfg = parse_config(SOLVE_YAML)

    assert parse_config(emit_config(cfg)) == cfg


def test__config__curve_section_builds_normalized_curve():
    curve = parse_config(SOLVE_YAML).curve.build()

    assert len(curve) == 128
    assert curve.axis()[2] == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize(
    ('text', 'match'),
    [
        ('command: solve\nH: 1.5\n', 'line 2 H: .*open interval'),
        ('command: solve\nsolver:\n  max_iterations: -1\n', 'line 3 solver.max_iterations'),
        ('command: solve\nbogus: 1\n', 'line 2 bogus'),
        ('command: launch\n', 'line 1 command'),
        ('command: pair\nH: 0.0\n', 'pair needs 0 < H < 1'),
        ('command: sweep\n', 'non-empty H_values'),
        ('command: exhaust\nexhaustion:\n  radii: [3.0, 2.0]\n', 'strictly increasing'),
        ('command: solve\ncurve:\n  kind: fourier\n', 'coefficient'),
        ('- solve\n', 'must be a mapping'),
    ],
)
def test__config__rejects_invalid_documents(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test__config__yaml_syntax_errors_carry_the_line():
    with pytest.raises(ConfigError) as exc_info:
        parse_config('command: solve\ncurve: {kind: circle\n')

    assert exc_info.value.line is not None
    assert 'invalid YAML' in str(exc_info.value)


def test__config__annulus_circles_must_fit_in_the_ball():
    with pytest.raises(ValueError):
        RunConfig(command=Command.ANNULUS, annulus={'circle_height': 0.8, 'circle_radius': 0.8})


@pytest.mark.parametrize(
    'path',
    sorted((pathlib.Path(__file__).parents[1] / 'configs').glob('*.yaml')),
    ids=lambda path: path.name,
)
def test__config__shipped_configs_parse(path):
    cfg = parse_config(path.read_text(encoding='utf-8'))

    assert cfg.output_dir.startswith('out/')
