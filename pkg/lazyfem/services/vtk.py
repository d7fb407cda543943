"""Legacy ASCII VTK output of cell fields sampled at mesh nodes.

Without refinement the points are the mesh nodes. With ``refine`` every cell
is split once on its order-2 node lattice and sampled there, which is how
higher-order fields are shown with linear visualisation cells; refined points
are not merged across cells.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..arrays import collect
from ..celldata import CellField, CellPoint
from ..fields import as_field
from ..geometry import Triangulation
from ..reffe import CellTopology, lattice

logger = logging.getLogger(__name__)

VTK_CELL_TYPES = {
    CellTopology.VERTEX: 1,
    CellTopology.SEG: 3,
    CellTopology.TRI: 5,
    CellTopology.QUAD: 9,
    CellTopology.TET: 10,
    CellTopology.HEX: 12,
}

# lexicographic vertex order to VTK order
VTK_VERTEX_ORDER = {
    CellTopology.QUAD: [0, 1, 3, 2],
    CellTopology.HEX: [0, 1, 3, 2, 4, 5, 7, 6],
}

_SUBCELLS = {
    CellTopology.SEG: [[(0,), (1,)], [(1,), (2,)]],
    CellTopology.TRI: [
        [(0, 0), (1, 0), (0, 1)],
        [(1, 0), (2, 0), (1, 1)],
        [(0, 1), (1, 1), (0, 2)],
        [(1, 0), (1, 1), (0, 1)],
    ],
    CellTopology.TET: [
        [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)],
        [(1, 0, 0), (2, 0, 0), (1, 1, 0), (1, 0, 1)],
        [(0, 1, 0), (1, 1, 0), (0, 2, 0), (0, 1, 1)],
        [(0, 0, 1), (1, 0, 1), (0, 1, 1), (0, 0, 2)],
        [(0, 1, 0), (1, 0, 1), (1, 0, 0), (0, 0, 1)],
        [(0, 1, 0), (1, 0, 1), (0, 0, 1), (0, 1, 1)],
        [(0, 1, 0), (1, 0, 1), (0, 1, 1), (1, 1, 0)],
        [(0, 1, 0), (1, 0, 1), (1, 1, 0), (1, 0, 0)],
    ],
}


def _cube_subcells(dim: int) -> list[list[tuple]]:
    cells = []
    for corner in np.ndindex(*(2,) * dim):
        corner = corner[::-1]
        cells.append([tuple(c + ((v >> k) & 1) for k, c in enumerate(corner)) for v in range(2**dim)])
    return cells


def refinement(topology: CellTopology) -> tuple[np.ndarray, np.ndarray]:
    """Reference points of the order-2 lattice and the sub-cells connecting them."""
    points = lattice(topology, 2)
    index = {tuple(int(c) for c in p): i for i, p in enumerate(points)}
    if topology in (CellTopology.QUAD, CellTopology.HEX):
        subcells = _cube_subcells(topology.dim)
    else:
        subcells = _SUBCELLS[topology]
    connectivity = np.array([[index[p] for p in cell] for cell in subcells], dtype=np.int64)
    return points / 2.0, connectivity


def _sample(f: Any, x: CellPoint) -> np.ndarray:
    cf = f if isinstance(f, CellField) else CellField.from_function(x.tri, as_field(f))
    return np.stack(collect(cf(x)))


def _format_values(name: str, values: np.ndarray) -> list[str]:
    npoints = values.shape[0]
    if values.ndim == 1:
        lines = [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines.extend(f"{v:.17g}" for v in values)
        return lines
    if values.ndim == 2 and values.shape[1] <= 3:
        padded = np.zeros((npoints, 3))
        padded[:, : values.shape[1]] = values
        return [f"VECTORS {name} double"] + [" ".join(f"{c:.17g}" for c in row) for row in padded]
    raise ValueError(f"field {name!r} with value shape {values.shape[1:]} cannot be written to VTK")


def write_vtk(tri: Triangulation, fields: Mapping[str, Any], path: str | Path, refine: bool = False) -> None:
    """Write ``tri`` with every field of ``fields`` as point data."""
    topology = tri.topology
    cell_nodes = tri.cell_nodes.to_dense()
    if refine and topology in VTK_CELL_TYPES and topology is not CellTopology.VERTEX:
        ref_points, sub = refinement(topology)
        x = CellPoint.reference(tri, ref_points)
        points = _sample_points(tri, x)
        npts = len(ref_points)
        cells = (np.arange(tri.num_cells)[:, None, None] * npts + sub[None]).reshape(-1, sub.shape[1])
        data = {}
        for name, f in fields.items():
            per_cell = _sample(f, x)
            data[name] = per_cell.reshape((-1,) + per_cell.shape[2:])
    else:
        x = CellPoint.reference(tri, topology.vertices.astype(float))
        points = tri.model.node_coordinates
        cells = cell_nodes
        data = {}
        for name, f in fields.items():
            per_cell = _sample(f, x)
            values = np.zeros((len(points),) + per_cell.shape[2:])
            values[cell_nodes] = per_cell
            data[name] = values

    order = VTK_VERTEX_ORDER.get(topology)
    if order is not None:
        cells = cells[:, order]
    coords = np.zeros((len(points), 3))
    coords[:, : points.shape[1]] = points

    lines = ["# vtk DataFile Version 3.0", "lazyfem output", "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {len(coords)} double")
    lines.extend(" ".join(f"{c:.17g}" for c in p) for p in coords)
    lines.append(f"CELLS {len(cells)} {cells.size + len(cells)}")
    lines.extend(" ".join(str(v) for v in [len(c), *c]) for c in cells)
    lines.append(f"CELL_TYPES {len(cells)}")
    lines.extend([str(VTK_CELL_TYPES[topology])] * len(cells))
    lines.append(f"POINT_DATA {len(coords)}")
    for name, values in data.items():
        lines.extend(_format_values(name, values))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("wrote %s: %d points, %d cells", path, len(coords), len(cells))


def _sample_points(tri: Triangulation, x: CellPoint) -> np.ndarray:
    physical = x.to_physical()
    return np.concatenate([np.asarray(p) for p in collect(physical.points)], axis=0)


def read_vtk_point_data(path: str | Path) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Points and point data arrays of a legacy ASCII file written by ``write_vtk``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    tokens = " ".join(lines[2:]).split()
    points = np.zeros((0, 3))
    data: dict[str, np.ndarray] = {}
    npoints = 0
    i = 0
    while i < len(tokens):
        word = tokens[i]
        if word == "POINTS":
            npoints = int(tokens[i + 1])
            points = np.array(tokens[i + 3:i + 3 + 3 * npoints], dtype=float).reshape(npoints, 3)
            i += 3 + 3 * npoints
        elif word == "CELLS":
            i += 3 + int(tokens[i + 2])
        elif word == "CELL_TYPES":
            i += 2 + int(tokens[i + 1])
        elif word == "SCALARS":
            name = tokens[i + 1]
            i += 3
            ncomp = 1
            if tokens[i] != "LOOKUP_TABLE":
                ncomp = int(tokens[i])
                i += 1
            i += 2
            values = np.array(tokens[i:i + npoints * ncomp], dtype=float)
            data[name] = values if ncomp == 1 else values.reshape(npoints, ncomp)
            i += npoints * ncomp
        elif word == "VECTORS":
            name = tokens[i + 1]
            i += 3
            data[name] = np.array(tokens[i:i + 3 * npoints], dtype=float).reshape(npoints, 3)
            i += 3 * npoints
        else:
            i += 1
    return points, data
