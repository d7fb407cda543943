"""Manufactured solutions with hand-coded gradients and loads.

Every function takes coordinates component-first (``x[0]`` is the array of
first coordinates) and sticks to numpy operations so it also runs on dual
numbers. Gradients follow ``grad[i][j] = d u_j / d x_i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from ..fields import GenericField


@dataclass
class ScalarSolution:
    name: str
    dim: int
    u: Callable[[Any], Any]
    grad: Callable[[Any], Any]
    source: Callable[[Any], Any]

    def field(self) -> GenericField:
        return GenericField(self.u, self.grad)

    def gradient_field(self) -> GenericField:
        return GenericField(self.grad)


@dataclass
class StokesSolution:
    name: str
    dim: int
    u: Callable[[Any], Any]
    grad_u: Callable[[Any], Any]
    p: Callable[[Any], Any]
    force: Callable[[Any], Any]
    divergence: Callable[[Any], Any]

    def velocity_field(self) -> GenericField:
        return GenericField(self.u, self.grad_u)

    def pressure_field(self) -> GenericField:
        return GenericField(self.p)


def polynomial_solution(dim: int, k: int) -> ScalarSolution:
    """``u = (x_1 + ... + x_D)^k`` and ``f = -D k (k-1) s^(k-2)``."""

    def total(x: Any) -> Any:
        s = x[0]
        for i in range(1, dim):
            s = s + x[i]
        return s

    def u(x: Any) -> Any:
        return total(x) ** k

    def grad(x: Any) -> list:
        g = k * total(x) ** (k - 1)
        return [g] * dim

    def source(x: Any) -> Any:
        if k < 2:
            return 0.0 * x[0]
        return -dim * k * (k - 1) * total(x) ** (k - 2)

    return ScalarSolution(f"polynomial{k}", dim, u, grad, source)


def sine_solution(dim: int) -> ScalarSolution:
    """``u = prod_i sin(pi x_i)`` with ``f = D pi^2 u``."""

    def u(x: Any) -> Any:
        value = np.sin(np.pi * x[0])
        for i in range(1, dim):
            value = value * np.sin(np.pi * x[i])
        return value

    def grad(x: Any) -> list:
        out = []
        for i in range(dim):
            value = np.pi * np.cos(np.pi * x[i])
            for j in range(dim):
                if j != i:
                    value = value * np.sin(np.pi * x[j])
            out.append(value)
        return out

    def source(x: Any) -> Any:
        return dim * np.pi ** 2 * u(x)

    return ScalarSolution("sine", dim, u, grad, source)


def scalar_solution(name: str, dim: int, k: int) -> ScalarSolution:
    if name == "polynomial":
        return polynomial_solution(dim, k)
    if name == "sine":
        return sine_solution(dim)
    raise ValueError(f"unknown manufactured solution {name!r}")


def stokes_solution(dim: int) -> StokesSolution:
    """``u = (x1^2 + 2 x2^2, -x2^2[, 0])``, ``p = x1 + 3 x2`` for ``-lap u + grad p = f``, ``div u = g``."""
    if dim not in (2, 3):
        raise ValueError("the Stokes solution is defined in 2D and 3D")
    zero = 0.0

    def u(x: Any) -> list:
        values = [x[0] ** 2 + 2 * x[1] ** 2, -x[1] ** 2]
        return values + [zero * x[0]] * (dim - 2)

    def grad_u(x: Any) -> list:
        rows = [[2 * x[0], zero * x[0]], [4 * x[1], -2 * x[1]]]
        rows = [row + [zero * x[0]] * (dim - 2) for row in rows]
        return rows + [[zero * x[0]] * dim] * (dim - 2)

    def p(x: Any) -> Any:
        return x[0] + 3 * x[1]

    def force(x: Any) -> list:
        return [-5.0 + zero * x[0], 5.0 + zero * x[0]] + [zero * x[0]] * (dim - 2)

    def divergence(x: Any) -> Any:
        return 2 * x[0] - 2 * x[1]

    return StokesSolution("stokes", dim, u, grad_u, p, force, divergence)


def inlet_profile(x: Any) -> list:
    """Inflow velocity along the third axis of the (0, .5) x (0, 1) x (0, 1.5) channel."""
    zero = 0.0 * x[0]
    return [zero, zero, (1 - (4 * x[0] - 1) ** 2) * (1 - (2 * x[1] - 1) ** 2)]


def zero_velocity(dim: int) -> Callable[[Any], list]:
    def velocity(x: Any) -> list:
        return [0.0 * x[0]] * dim

    return velocity
