import logging
import pathlib

import numpy as np

from hplanes.mesh.model import Topology, TriMesh

_logger = logging.getLogger(__name__)

_TOPOLOGY_TAG = '# topology'
_BOUNDARY_TAG = '# boundary'


class ObjFormatError(ValueError):
    pass


def format_obj(mesh: TriMesh, header: str | None = None) -> str:
    """OBJ text with 1-based faces and boundary loops as tagged comment lines."""
    lines = []
    if header:
        lines.extend(f'# {line}' for line in header.splitlines())
    lines.append(f'{_TOPOLOGY_TAG} {mesh.topology.value}')
    for loop in mesh.boundary_loops:
        lines.append(f'{_BOUNDARY_TAG} ' + ' '.join(str(int(v) + 1) for v in loop))
    lines.extend(f'v {x:.17g} {y:.17g} {z:.17g}' for x, y, z in mesh.vertices)
    lines.extend(f'f {a + 1} {b + 1} {c + 1}' for a, b, c in mesh.triangles)
    return '\n'.join(lines) + '\n'


def write_obj(path: pathlib.Path, mesh: TriMesh, header: str | None = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(f'{path.suffix}.tmp')
    tmp_path.write_text(format_obj(mesh, header), encoding='utf-8')
    tmp_path.replace(path)
    _logger.debug('Wrote %d vertices to %s', mesh.vertex_count, path)


def parse_obj(text: str) -> TriMesh:
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    loops: list[list[int]] = []
    topology: Topology | None = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        try:
            if line.startswith(_TOPOLOGY_TAG):
                topology = Topology(line[len(_TOPOLOGY_TAG) :].strip())
            elif line.startswith(_BOUNDARY_TAG):
                loops.append([int(token) - 1 for token in line[len(_BOUNDARY_TAG) :].split()])
            elif line.startswith('v '):
                vertices.append([float(token) for token in line.split()[1:4]])
            elif line.startswith('f '):
                # keep only the vertex index of v/vt/vn references
                face = [int(token.split('/')[0]) - 1 for token in line.split()[1:]]
                if len(face) != 3:
                    raise ObjFormatError(f'Line {number}: only triangles are supported')
                faces.append(face)
        except ValueError as exc:
            if isinstance(exc, ObjFormatError):
                raise
            raise ObjFormatError(f'Line {number}: cannot parse {line!r}') from exc

    if topology is None:
        raise ObjFormatError('Missing topology tag')
    return TriMesh.build(
        np.array(vertices, dtype=float).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
        topology,
        [np.array(loop, dtype=np.int64) for loop in loops],
    )


def read_obj(path: pathlib.Path) -> TriMesh:
    return parse_obj(path.read_text(encoding='utf-8'))
