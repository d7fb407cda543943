from __future__ import annotations

import logging
import time
from typing import Any

from ..geometry import DiscreteModel, cartesian_model
from ..meshio import read_model

logger = logging.getLogger(__name__)

CHANNEL_EXTENTS = (0.5, 1.0, 1.5)
FLOW_TAGS = ("inlet", "noslip", "ux0", "outlet")


def channel_model(partitions: Any, simplexify: bool = True) -> DiscreteModel:
    """The (0, .5) x (0, 1) x (0, 1.5) channel with inflow, wall and outflow labels."""
    model = cartesian_model((0.0, 0.0, 0.0), CHANNEL_EXTENTS, partitions, simplexify)
    model.add_tag_from_tags("inlet", "zmin")
    model.add_tag_from_tags("outlet", "zmax")
    model.add_tag_from_tags("noslip", ["ymin", "ymax"])
    model.add_tag_from_tags("ux0", ["xmin", "xmax"])
    return model


def has_flow_tags(model: DiscreteModel) -> bool:
    return all(tag in model.labels for tag in FLOW_TAGS)


def ensure_boundary_tag(model: DiscreteModel) -> None:
    if "boundary" not in model.labels:
        model.add_tag("boundary", model.boundary_facets())


def build_model(cfg: Any) -> tuple[DiscreteModel, float | None]:
    """Model described by the run configuration and the seconds spent reading it from disk."""
    if cfg.geometry.startswith("file:"):
        start = time.perf_counter()
        model = read_model(cfg.geometry[len("file:"):])
        mesh_io = time.perf_counter() - start
        ensure_boundary_tag(model)
        return model, mesh_io
    if cfg.geometry == "channel":
        return channel_model(cfg.partitions, cfg.simplexify), None
    dim = len(cfg.partitions)
    origin = cfg.origin or (0.0,) * dim
    extents = cfg.extents or (1.0,) * dim
    model = cartesian_model(origin, extents, cfg.partitions, cfg.simplexify)
    logger.info("built %s model with %d cells", model.topology.value, model.num_cells)
    return model, None
