"""
Mesh I/O Module

Reader and writer for the plain-text ``wavepp-mesh v1`` format::

    wavepp-mesh v1 dim=2
    vertices <n>
    <x> <y>                       (n lines)
    elements <m>
    <i> <j> <k>                   (m lines, 0-based)
    boundary <k>
    facet <v...> tag=<dirichlet|periodic:<id>>
    curved <element> degree=<m>   (optional, repeated)
    <x> <y>                       (3m control points)
"""

from pathlib import Path
from typing import Dict, Iterator, List, Tuple, Union

import numpy as np
import structlog

from src.fem.mesh import curved_map_from_control_points, validate_mesh
from src.models.mesh import BoundaryFacet, GeometricMap, Mesh
from src.utils.errors import MeshError, MeshFormatError


logger = structlog.get_logger(__name__)

HEADER = "wavepp-mesh v1"


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_mesh(mesh: Mesh, path: Union[str, Path]) -> None:
    lines = [f"{HEADER} dim={mesh.dim}", f"vertices {mesh.n_vertices}"]
    lines += [" ".join(_fmt(c) for c in v) for v in mesh.vertices]
    lines.append(f"elements {mesh.n_elements}")
    lines += [" ".join(str(int(i)) for i in el) for el in mesh.elements]
    lines.append(f"boundary {len(mesh.boundary)}")
    lines += [
        "facet " + " ".join(str(v) for v in f.vertices) + f" tag={f.tag}"
        for f in mesh.boundary
    ]
    for e in sorted(mesh.curved_maps):
        gmap = mesh.curved_maps[e]
        lines.append(f"curved {e} degree={gmap.degree}")
        lines += [" ".join(_fmt(c) for c in pt) for pt in gmap.control_points]

    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug("mesh_written", path=str(path), n_elements=mesh.n_elements)


class _Lines:
    """Line cursor that remembers 1-based line numbers."""

    def __init__(self, text: str):
        self._lines: List[Tuple[int, str]] = [
            (n + 1, line.strip()) for n, line in enumerate(text.splitlines()) if line.strip()
        ]
        self._pos = 0

    @property
    def done(self) -> bool:
        return self._pos >= len(self._lines)

    def next(self, expecting: str) -> Tuple[int, str]:
        if self.done:
            last = self._lines[-1][0] if self._lines else 0
            raise MeshFormatError(f"unexpected end of file, expected {expecting}", last + 1)
        item = self._lines[self._pos]
        self._pos += 1
        return item


def _section(lines: _Lines, keyword: str) -> Tuple[int, int]:
    """Parse a section header; returns (count, line_number)."""
    number, line = lines.next(f"'{keyword} <count>'")
    parts = line.split()
    if len(parts) != 2 or parts[0] != keyword:
        raise MeshFormatError(f"expected '{keyword} <count>', got '{line}'", number)
    try:
        return int(parts[1]), number
    except ValueError:
        raise MeshFormatError(f"bad {keyword} count '{parts[1]}'", number) from None


def _numbers(lines: _Lines, count: int, width: int, kind: type, what: str) -> np.ndarray:
    rows = []
    for _ in range(count):
        number, line = lines.next(what)
        parts = line.split()
        if len(parts) != width:
            raise MeshFormatError(f"expected {width} values for {what}, got {len(parts)}", number)
        try:
            rows.append([kind(p) for p in parts])
        except ValueError:
            raise MeshFormatError(f"cannot parse {what} '{line}'", number) from None
    return np.array(rows, dtype=kind).reshape(count, width)


def read_mesh(path: Union[str, Path]) -> Mesh:
    """Parse a mesh file; format errors carry the offending line number."""
    lines = _Lines(Path(path).read_text(encoding="utf-8"))

    number, header = lines.next("header")
    if not header.startswith(HEADER) or "dim=" not in header:
        raise MeshFormatError(f"missing '{HEADER} dim=<d>' header", number)
    try:
        dim = int(header.split("dim=", 1)[1])
    except ValueError:
        raise MeshFormatError("bad dimension in header", number) from None
    if dim not in (1, 2):
        raise MeshFormatError(f"unsupported dimension {dim}", number)

    vertices = _numbers(lines, _section(lines, "vertices")[0], dim, float, "vertex")
    n_elements, number = _section(lines, "elements")
    if n_elements == 0:
        raise MeshFormatError("empty element list", number)
    elements = _numbers(lines, n_elements, dim + 1, int, "element")

    boundary = []
    for _ in range(_section(lines, "boundary")[0]):
        number, line = lines.next("facet")
        parts = line.split()
        if len(parts) < 3 or parts[0] != "facet" or not parts[-1].startswith("tag="):
            raise MeshFormatError(f"malformed facet line '{line}'", number)
        try:
            verts = tuple(int(v) for v in parts[1:-1])
        except ValueError:
            raise MeshFormatError(f"bad facet vertex in '{line}'", number) from None
        boundary.append(BoundaryFacet(vertices=verts, tag=parts[-1][4:]))

    curved_maps: Dict[int, GeometricMap] = {}
    while not lines.done:
        number, line = lines.next("curved block")
        parts = line.split()
        if len(parts) != 3 or parts[0] != "curved" or not parts[2].startswith("degree="):
            raise MeshFormatError(f"expected 'curved <element> degree=<m>', got '{line}'", number)
        try:
            e, degree = int(parts[1]), int(parts[2][7:])
        except ValueError:
            raise MeshFormatError(f"bad curved header '{line}'", number) from None
        if dim != 2 or not 0 <= e < n_elements or degree < 1:
            raise MeshFormatError(f"invalid curved block '{line}'", number)
        points = _numbers(lines, 3 * degree, 2, float, "control point")
        curved_maps[e] = curved_map_from_control_points(e, degree, points)

    mesh = Mesh(
        dim=dim,
        vertices=vertices,
        elements=elements,
        boundary=boundary,
        curved_maps=curved_maps,
        name=Path(path).stem,
    )
    try:
        validate_mesh(mesh)
    except MeshError:
        logger.warning("mesh_rejected", path=str(path))
        raise
    return mesh
