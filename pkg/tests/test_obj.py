import numpy as np
import pytest

from hplanes.mesh.generators import annulus_between, flat_disk
from hplanes.mesh.model import Topology
from hplanes.mesh.obj import ObjFormatError, format_obj, parse_obj, read_obj, write_obj


def test__obj__text_layout():
    mesh = flat_disk(1.0, rings=2)

    text = format_obj(mesh, header='H=0.3\nstage 2')

    lines = text.splitlines()
    assert lines[:3] == ['# H=0.3', '# stage 2', '# topology disk']
    assert lines[3].startswith('# boundary ')
    assert sum(line.startswith('v ') for line in lines) == mesh.vertex_count
    assert sum(line.startswith('f ') for line in lines) == mesh.triangle_count
    assert 'f 1 ' in text


def test__obj__write_and_read_annulus(tmp_path):
    loop = 0.5 * np.column_stack(
        [np.cos(np.linspace(0, 2 * np.pi, 24, endpoint=False)),
         np.sin(np.linspace(0, 2 * np.pi, 24, endpoint=False)),
         np.full(24, 0.4)]
    )  # fmt: skip
    mesh = annulus_between(loop, loop * [1.0, 1.0, -1.0], rows=4)
    path = tmp_path / 'out' / 'annulus.obj'

    write_obj(path, mesh)
    loaded = read_obj(path)

    assert not path.with_suffix('.obj.tmp').exists()
    assert loaded.topology == Topology.ANNULUS
    np.testing.assert_array_equal(loaded.vertices, mesh.vertices)
    np.testing.assert_array_equal(loaded.triangles, mesh.triangles)
    assert [x.tolist() for x in loaded.boundary_loops] == [x.tolist() for x in mesh.boundary_loops]


def test__obj__accepts_texture_and_normal_references():
    text = '\n'.join(
        [
            '# topology disk',
            '# boundary 1 2 3',
            'v 0 0 0',
            'v 0.5 0 0',
            'v 0 0.5 0',
            'f 1/1/1 2/2/2 3/3/3',
        ]
    )

    mesh = parse_obj(text)

    assert mesh.triangles.tolist() == [[0, 1, 2]]


@pytest.mark.parametrize(
    ('text', 'message'),
    [
        ('v 0 0 0\nv 0.5 0 0\nv 0 0.5 0\nf 1 2 3\n', 'Missing topology'),
        ('# topology disk\nv 0 0 0\nv 0.5 0 0\nv 0 0.5 0\nv 0.5 0.5 0\nf 1 2 4 3\n', 'triangles'),
        ('# topology disk\nv 0 zero 0\n', 'Line 2'),
        ('# topology torus\n', 'Line 1'),
    ],
)
def test__obj__rejects_malformed_text(text, message):
    with pytest.raises(ObjFormatError, match=message):
        parse_obj(text)
