from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import UnsupportedElementError
from .reffe import CellTopology

MAX_DEGREE = 40


@dataclass(frozen=True, eq=False)
class Quadrature:
    topology: CellTopology
    degree: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def num_points(self) -> int:
        return len(self.weights)


def gauss_legendre_01(npoints: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule mapped to [0, 1]."""
    x, w = leggauss(npoints)
    return 0.5 * (x + 1.0), 0.5 * w


def _tensor(rules: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    coords = np.meshgrid(*(r[0] for r in rules), indexing="ij")
    weights = np.meshgrid(*(r[1] for r in rules), indexing="ij")
    points = np.stack([c.reshape(-1) for c in coords], axis=1)
    return points, np.prod(np.stack([w.reshape(-1) for w in weights]), axis=0)


def _npoints(degree: int, extra: int = 0) -> int:
    return max(1, math.ceil((degree + 1 + extra) / 2))


def _duffy_triangle(degree: int) -> tuple[np.ndarray, np.ndarray]:
    (uv, w) = _tensor([gauss_legendre_01(_npoints(degree, 1)), gauss_legendre_01(_npoints(degree))])
    u, v = uv[:, 0], uv[:, 1]
    points = np.stack([u, (1.0 - u) * v], axis=1)
    return points, w * (1.0 - u)


def _duffy_tetrahedron(degree: int) -> tuple[np.ndarray, np.ndarray]:
    uvw, w = _tensor([
        gauss_legendre_01(_npoints(degree, 2)),
        gauss_legendre_01(_npoints(degree, 1)),
        gauss_legendre_01(_npoints(degree)),
    ])
    u, v, t = uvw[:, 0], uvw[:, 1], uvw[:, 2]
    points = np.stack([u, (1.0 - u) * v, (1.0 - u) * (1.0 - v) * t], axis=1)
    return points, w * (1.0 - u) ** 2 * (1.0 - v)


@functools.lru_cache(maxsize=None)
def _cached_quadrature(topology: CellTopology, degree: int) -> Quadrature:
    if topology is CellTopology.VERTEX:
        points, weights = np.zeros((1, 0)), np.ones(1)
    elif topology is CellTopology.TRI:
        points, weights = _duffy_triangle(degree)
    elif topology is CellTopology.TET:
        points, weights = _duffy_tetrahedron(degree)
    else:
        points, weights = _tensor([gauss_legendre_01(_npoints(degree))] * topology.dim)
    points.setflags(write=False)
    weights.setflags(write=False)
    return Quadrature(topology, degree, points, weights)


def make_quadrature(topology: Any, degree: int) -> Quadrature:
    """Rule exact for polynomials of total degree ``degree`` (tensor degree on cubes).

    Rules are shared: equal arguments give the same point array object.
    """
    topology = CellTopology.from_name(topology)
    degree = int(degree)
    if degree < 0 or degree > MAX_DEGREE:
        raise UnsupportedElementError(f"quadrature degree {degree} not in 0..{MAX_DEGREE}")
    return _cached_quadrature(topology, degree)
