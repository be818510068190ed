"""Uniform 1D meshes, piecewise linear finite elements and discrete norms.

Only interior nodes carry degrees of freedom; every discrete function
is extended by zero outside the domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .toeplitz import SymmetricToeplitz


@dataclass(frozen=True)
class Mesh1D:
    """Uniform subdivision of ``(a, b)`` into ``n_elem`` elements."""

    a: float
    b: float
    n_elem: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("need a < b")
        if int(self.n_elem) != self.n_elem or self.n_elem < 2:
            raise ValueError("n_elem must be an integer >= 2")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_elem

    @property
    def diam(self) -> float:
        return self.b - self.a

    @cached_property
    def nodes(self) -> np.ndarray:
        x = self.a + self.h * np.arange(self.n_elem + 1)
        x[-1] = self.b
        x.setflags(write=False)
        return x

    @property
    def interior_dofs(self) -> np.ndarray:
        return np.arange(1, self.n_elem)

    @property
    def n_dofs(self) -> int:
        return self.n_elem - 1

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]


def build_mesh(a: float = -1.0, b: float = 1.0, n_elem: int = 2) -> Mesh1D:
    """Create a uniform mesh of ``(a, b)``.

    Examples
    --------
    >>> build_mesh(-1, 1, 4).nodes
    array([-1. , -0.5,  0. ,  0.5,  1. ])
    """
    return Mesh1D(float(a), float(b), int(n_elem))


def mass_matrix(mesh: Mesh1D) -> SymmetricToeplitz:
    """P1 mass matrix on interior nodes (rows ``h/6 * [1, 4, 1]``)."""
    row = np.zeros(mesh.n_dofs)
    row[0] = 2.0 * mesh.h / 3.0
    if mesh.n_dofs > 1:
        row[1] = mesh.h / 6.0
    return SymmetricToeplitz(row)


def _element_points(mesh: Mesh1D, order: int):
    # Gauss points on every element: arrays (n_elem, order)
    t, w = np.polynomial.legendre.leggauss(order)
    lam = 0.5 * (t + 1.0)
    x = mesh.nodes[:-1, None] + mesh.h * lam[None, :]
    return x, lam, 0.5 * mesh.h * w


def load_vector(mesh: Mesh1D, f: Callable, order: int = 6) -> np.ndarray:
    """Entries ``(f, phi_i)`` for interior hat functions.

    Parameters
    ----------
    f : callable
        Vectorized function of ``x``; scalars are also accepted.
    order : int
        Gauss points per element.
    """
    x, lam, w = _element_points(mesh, order)
    fx = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    # element e contributes to its left node (1 - lam) and right node (lam)
    right = (fx * lam * w).sum(axis=1)   # contribution to node e+1
    left = (fx * (1 - lam) * w).sum(axis=1)  # contribution to node e
    return right[:-1] + left[1:]


def p1_values(mesh: Mesh1D, coeffs, x) -> np.ndarray:
    """Evaluate the P1 function with interior ``coeffs`` at points ``x``."""
    full = np.concatenate([[0.0], np.asarray(coeffs, dtype=float), [0.0]])
    x = np.asarray(x, dtype=float)
    return np.where((x >= mesh.a) & (x <= mesh.b), np.interp(x, mesh.nodes, full), 0.0)


def interpolate(mesh: Mesh1D, func: Callable) -> np.ndarray:
    """Nodal interpolant on interior nodes."""
    return np.asarray(func(mesh.interior_nodes), dtype=float)


def l2_error(mesh: Mesh1D, u_h, u_exact: Callable, order: int = 12) -> float:
    """``||u_h - u_exact||`` in ``L2(a, b)`` by per-element Gauss quadrature."""
    if order < 10:
        raise ValueError("order must be at least 10")
    full = np.concatenate([[0.0], np.asarray(u_h, dtype=float), [0.0]])
    x, lam, w = _element_points(mesh, order)
    uh = full[:-1, None] * (1 - lam) + full[1:, None] * lam
    diff = uh - np.asarray(u_exact(x), dtype=float)
    return float(np.sqrt(np.sum(diff**2 * w)))


def energy_norm(v, A) -> float:
    """``sqrt(v^T A v)`` for a stiffness matrix at infinite horizon.

    Raises
    ------
    ValueError
        If the quadratic form is negative beyond round-off.
    """
    v = np.asarray(v, dtype=float)
    mat = getattr(A, "entries", A)
    if isinstance(mat, SymmetricToeplitz):
        val = mat.quad_form(v)
        scale = abs(mat.row[0]) * float(v @ v)
    else:
        mat = np.asarray(mat)
        val = float(v @ (mat @ v))
        scale = float(np.abs(mat).max()) * float(v @ v)
    if val < -1e-12 * max(scale, 1.0):
        raise ValueError(f"negative energy {val:.3e}; matrix is not positive definite")
    return float(np.sqrt(max(val, 0.0)))
