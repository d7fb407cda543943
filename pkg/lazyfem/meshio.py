"""Reader and writer of the JSON mesh format described in docs/MESH_FORMAT.md."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

from .arrays import CompressedArray, JaggedTable
from .errors import MeshFormatError, UnsupportedElementError
from .geometry import DiscreteModel
from .reffe import CellTopology

logger = logging.getLogger(__name__)

FORMAT_NAME = "lazyfem-mesh"
FORMAT_VERSION = 1
FIELDS = ("format", "version", "dim", "nodes", "cells", "cell_types", "labels")
REQUIRED = ("dim", "nodes", "cells", "cell_types")


def _int_rows(value: Any, field: str) -> list[list[int]]:
    if not isinstance(value, list) or not all(isinstance(r, list) for r in value):
        raise MeshFormatError(f"'{field}' must be a list of lists")
    for row in value:
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in row):
            raise MeshFormatError(f"'{field}' rows must contain integer ids")
    return value


def model_from_dict(data: Any) -> DiscreteModel:
    if not isinstance(data, dict):
        raise MeshFormatError("mesh file must contain a JSON object")
    unknown = sorted(set(data) - set(FIELDS))
    if unknown:
        raise MeshFormatError(f"unknown field {unknown[0]!r}")
    missing = [k for k in REQUIRED if k not in data]
    if missing:
        raise MeshFormatError(f"missing field {missing[0]!r}")
    if data.get("format", FORMAT_NAME) != FORMAT_NAME:
        raise MeshFormatError(f"unsupported format {data['format']!r}")
    if data.get("version", FORMAT_VERSION) != FORMAT_VERSION:
        raise MeshFormatError(f"unsupported version {data['version']!r}")

    dim = data["dim"]
    if not isinstance(dim, int) or dim not in (1, 2, 3):
        raise MeshFormatError("'dim' must be 1, 2 or 3")
    try:
        nodes = np.array(data["nodes"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise MeshFormatError("'nodes' must be rows of numbers") from exc
    if nodes.ndim != 2 or nodes.shape[1] != dim:
        raise MeshFormatError(f"'nodes' rows must have {dim} coordinates")

    cells = _int_rows(data["cells"], "cells")
    names = data["cell_types"]
    if not isinstance(names, list) or len(names) != len(cells):
        raise MeshFormatError("'cell_types' must name one topology per cell")
    try:
        topologies = [CellTopology.from_name(n) for n in names]
    except UnsupportedElementError as exc:
        raise MeshFormatError(str(exc)) from exc
    if any(t.dim != dim for t in topologies):
        raise MeshFormatError(f"every cell of a {dim}D mesh must be {dim}-dimensional")
    values = sorted(set(topologies), key=lambda t: t.value)
    index_map = np.array([values.index(t) for t in topologies], dtype=np.int64)

    model = DiscreteModel(nodes, JaggedTable.from_rows(cells, dtype=np.int64), CompressedArray(values, index_map))
    labels = data.get("labels", {})
    if not isinstance(labels, dict):
        raise MeshFormatError("'labels' must map tag names to facet lists")
    for tag, facets in labels.items():
        model.add_tag(tag, model.facets_from_vertices(_int_rows(facets, f"labels.{tag}")))
    return model


def model_to_dict(model: DiscreteModel) -> dict[str, Any]:
    nodes = model.facet_nodes
    labels = {tag: [sorted(int(v) for v in nodes[f]) for f in ids] for tag, ids in model.labels.items()}
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "dim": model.dim,
        "nodes": model.node_coordinates.tolist(),
        "cells": [row.tolist() for row in model.cells],
        "cell_types": [t.value for t in model.cell_types],
        "labels": labels,
    }


def read_model(path: str | Path) -> DiscreteModel:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshFormatError(exc.msg, exc.lineno, exc.colno) from exc
    model = model_from_dict(data)
    logger.info("read %s: %d nodes, %d cells", path, model.num_nodes, model.num_cells)
    return model


def write_model(model: DiscreteModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")
