"""Stiffness matrices of the (truncated) fractional kernel on uniform meshes.

The bilinear form

    a(u, v; s, delta) = int int_{|x-y| < delta} (u(x)-u(y)) (v(x)-v(y)) |x-y|^{-1-2s} dy dx

is taken over the whole real line with ``u, v`` extended by zero.  For
hat functions on a uniform mesh the entry ``a(phi_i, phi_j)`` depends
only on ``d = |i - j|``.  Substituting ``x - y = h*z`` and integrating
out the remaining variable turns every entry into a 1D integral against
the autocorrelation of the hat function, which is ``h * B3(t/h)`` with
``B3`` the centred cubic B-spline:

    a(phi_0, phi_d) = -2 h^{1-2s} int_0^{delta/h} D_d(z) z^{-1-2s} dz,
    D_d(z) = B3(d+z) - 2 B3(d) + B3(d-z).

``D_d`` is a cubic polynomial on every ``[k, k+1]``.  The piece next to
the singularity is integrated exactly (it is a combination of powers
of ``z``); the remaining pieces are smooth and handled by Gauss-Legendre
rules, and the constant tail for ``z > d + 2`` is closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh_fem import Mesh1D, mass_matrix
from .toeplitz import SymmetricToeplitz

KINDS = (
    "full",
    "infinite-horizon",
    "correction",
    "s-derivative",
    "s-derivative-correction",
    "delta-derivative",
)


@dataclass(frozen=True)
class ParamPoint:
    """Control ``q = (s, delta)``; ``delta = inf`` means no truncation."""

    s: float
    delta: float = math.inf

    def __post_init__(self):
        s, d = float(self.s), float(self.delta)
        if not (0.0 < s < 1.0):
            raise ValueError(f"s must lie in (0, 1), got {s}")
        if not (d > 0.0):
            raise ValueError(f"delta must be positive or inf, got {d}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "delta", d)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.delta)

    @property
    def key(self):
        return (self.s, self.delta)


@dataclass(frozen=True)
class QuadratureConfig:
    """Gauss-Legendre orders for the smooth pieces of the entry integrals.

    The piece adjacent to the kernel singularity is integrated exactly,
    so the orders here only govern smooth integrands.

    Attributes
    ----------
    singular_order : int
        Points on the piece ``[1, 2]``, the closest to the singularity.
    regular_order_base : int
        Points on ``[2, 3]``; farther pieces lose one point per doubling
        of distance when ``distance_decay`` is set.
    distance_decay : bool
    min_order : int
        Floor for the decayed order.
    """

    singular_order: int = 12
    regular_order_base: int = 8
    distance_decay: bool = True
    min_order: int = 3

    def __post_init__(self):
        if min(self.singular_order, self.regular_order_base, self.min_order) < 2:
            raise ValueError("quadrature orders must be >= 2")

    def orders(self, piece: np.ndarray) -> np.ndarray:
        piece = np.asarray(piece)
        out = np.full(piece.shape, self.regular_order_base, dtype=int)
        if self.distance_decay:
            lg = np.floor(np.log2(np.maximum(piece, 1))).astype(int)
            out = np.maximum(self.regular_order_base - lg + 1, self.min_order)
            out = np.minimum(out, self.regular_order_base)
        return np.where(piece <= 1, self.singular_order, out)


@dataclass(frozen=True, eq=False)
class StiffnessMatrix:
    """Assembled operator on interior DOFs, stored as a symmetric Toeplitz row."""

    entries: SymmetricToeplitz
    param: ParamPoint
    kind: str = "full"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")

    @property
    def row(self) -> np.ndarray:
        return self.entries.row

    @property
    def n(self) -> int:
        return self.entries.n

    def dense(self) -> np.ndarray:
        return self.entries.dense()

    def matvec(self, x):
        return self.entries.matvec(x)

    def quad_form(self, u, v=None) -> float:
        return self.entries.quad_form(u, v)

    def __matmul__(self, x):
        return self.entries.matvec(x)


# --- cubic B-spline integrals ---------------------------------------------

def _b3(t):
    t = np.abs(t)
    return np.where(
        t < 1.0, 2.0 / 3.0 - t**2 + 0.5 * t**3, np.where(t < 2.0, (2.0 - t) ** 3 / 6.0, 0.0)
    )


# coefficients (c0, c2, c3) of the profile on [0, 1] for d = 0, 1, 2
_PIECE0 = {
    "D": {0: (0.0, -2.0, 1.0), 1: (0.0, 1.0, -2.0 / 3.0), 2: (0.0, 0.0, 1.0 / 6.0)},
    "E": {0: (4.0 / 3.0, -2.0, 1.0), 1: (1.0 / 3.0, 1.0, -2.0 / 3.0), 2: (0.0, 0.0, 1.0 / 6.0)},
}


def _power_integral(e: float, a: float, b: float, log: bool) -> float:
    """``int_a^b z^{e-1} [ln z] dz`` for ``e != 0``; ``a = 0`` needs ``e > 0``."""
    if log:
        def F(z):
            if z == 0.0 or math.isinf(z):
                return 0.0
            return z**e * (math.log(z) / e - 1.0 / e**2)
        return F(b) - F(a)
    if a == 0.0:
        return b**e / e
    if math.isinf(b):
        return -(a**e) / e
    return a**e * math.expm1(e * math.log(b / a)) / e


def _profile(kind: str, d, z):
    val = _b3(d + z) + _b3(d - z)
    if kind == "D":
        val = val - 2.0 * _b3(d)
    return val


def kernel_moments(
    n: int,
    s: float,
    lo: float,
    hi: float,
    kind: str = "D",
    log: bool = False,
    quad: QuadratureConfig | None = None,
) -> np.ndarray:
    """Integrals ``int_lo^hi P_d(z) [ln z] z^{-1-2s} dz`` for ``d = 0..n-1``.

    ``P_d`` is the second difference ``D_d`` of the cubic B-spline
    (``kind="D"``) or its symmetric sum ``E_d = B3(d+z) + B3(d-z)``
    (``kind="E"``).  ``hi`` may be infinite.  For ``kind="D"`` the
    lower limit must be 0 or positive; for ``kind="E"`` it must be
    positive.
    """
    quad = quad or QuadratureConfig()
    if kind not in ("D", "E"):
        raise ValueError("kind must be 'D' or 'E'")
    if lo < 0 or hi <= lo:
        raise ValueError("need 0 <= lo < hi")
    if kind == "E" and lo == 0:
        raise ValueError("E-profile integral diverges at 0")
    out = np.zeros(n)
    # piece [0, 1], exact
    a0, b0 = lo, min(1.0, hi)
    if a0 < b0:
        for d, coef in _PIECE0[kind].items():
            if d >= n:
                break
            out[d] += sum(
                c * _power_integral(p - 2.0 * s, a0, b0, log)
                for c, p in zip(coef, (0, 2, 3))
                if c != 0.0
            )
    # pieces [j, j+1], j >= 1, where the profile is a non-trivial cubic
    d = np.arange(n)
    dd = np.concatenate([d + 0 * o for o in (-2, -1, 0, 1)])
    jj = np.concatenate([d + o for o in (-2, -1, 0, 1)])
    a = np.maximum(jj, lo).astype(float)
    b = np.minimum(jj + 1.0, hi)
    keep = (jj >= 1) & (a < b)
    dd, jj, a, b = dd[keep], jj[keep], a[keep], b[keep]
    orders = quad.orders(jj)
    for m in np.unique(orders):
        sel = orders == m
        t, w = np.polynomial.legendre.leggauss(int(m))
        mid = 0.5 * (a[sel] + b[sel])
        half = 0.5 * (b[sel] - a[sel])
        z = mid[:, None] + half[:, None] * t[None, :]
        f = _profile(kind, dd[sel][:, None], z) * z ** (-1.0 - 2.0 * s)
        if log:
            f = f * np.log(z)
        out += np.bincount(dd[sel], weights=(f @ w) * half, minlength=n)
    # constant tail for z > d + 2 (only D-profile with d <= 1)
    if kind == "D":
        for dv in range(min(n, 2)):
            L = max(lo, dv + 2.0)
            if L < hi:
                out[dv] += -2.0 * float(_b3(dv)) * _power_integral(-2.0 * s, L, hi, log)
    return out


# --- assembly ---------------------------------------------------------------

def _check_s(s):
    if not (0.0 < s < 1.0):
        raise ValueError(f"s must lie in (0, 1), got {s}")


def _check_delta(delta):
    if not math.isfinite(delta):
        raise ValueError("finite horizon required; use assemble_infinite for delta = inf")
    if delta <= 0:
        raise ValueError("delta must be positive")


def infinite_row(mesh: Mesh1D, s: float, quad: QuadratureConfig | None = None) -> np.ndarray:
    """First row of ``A(s, inf)``."""
    _check_s(s)
    h = mesh.h
    return -2.0 * h ** (1 - 2 * s) * kernel_moments(mesh.n_dofs, s, 0.0, math.inf, "D", False, quad)


def assemble_infinite(
    mesh: Mesh1D, s: float, quad: QuadratureConfig | None = None, scale: float = 1.0
) -> StiffnessMatrix:
    """Stiffness matrix of the untruncated kernel (``delta = inf``).

    Parameters
    ----------
    scale : float
        Constant multiplying the kernel, e.g. the fractional Laplacian
        normalization.
    """
    row = scale * infinite_row(mesh, s, quad)
    return StiffnessMatrix(SymmetricToeplitz(row), ParamPoint(s), "infinite-horizon")


def _far_field_row(mesh, s, delta, quad, log):
    # 2 int int_{|x-y|>delta} phi_0(x) phi_d(y) [ln|x-y|] |x-y|^{-1-2s}
    n = mesh.n_dofs
    h = mesh.h
    Delta = delta / h
    if Delta >= n + 1:
        # supports of phi_0 and phi_d are closer than delta for all d
        return np.zeros(n)
    scale = 2.0 * h ** (1 - 2 * s)
    I = kernel_moments(n, s, Delta, math.inf, "E", False, quad)
    if not log:
        return scale * I
    IL = kernel_moments(n, s, Delta, math.inf, "E", True, quad)
    return scale * (math.log(h) * I + IL)


def assemble_correction(
    mesh: Mesh1D, s: float, delta: float, quad: QuadratureConfig | None = None, scale: float = 1.0
) -> StiffnessMatrix:
    """Correction ``C(s, delta) = A(s, delta) - A(s, inf)``.

    ``C = -(2 delta^{-2s} / s) M + F`` with ``F`` the far-field
    interaction of the hat functions beyond distance ``delta``; ``F``
    vanishes once ``delta`` exceeds the domain diameter.
    """
    _check_s(s)
    _check_delta(delta)
    M = mass_matrix(mesh).row
    row = -2.0 * delta ** (-2 * s) / s * M + _far_field_row(mesh, s, delta, quad, False)
    return StiffnessMatrix(SymmetricToeplitz(scale * row), ParamPoint(s, delta), "correction")


def assemble_truncated_direct(
    mesh: Mesh1D, q: ParamPoint, quad: QuadratureConfig | None = None, scale: float = 1.0
) -> StiffnessMatrix:
    """Truncated operator integrated directly over ``|x - y| < delta``.

    Independent of the splitting into infinite part plus correction;
    used for cross-validation.
    """
    _check_delta(q.delta)
    h = mesh.h
    row = -2.0 * h ** (1 - 2 * q.s) * kernel_moments(mesh.n_dofs, q.s, 0.0, q.delta / h, "D", False, quad)
    return StiffnessMatrix(SymmetricToeplitz(scale * row), q, "full")


def assemble_delta_derivative(mesh: Mesh1D, q: ParamPoint, scale: float = 1.0) -> StiffnessMatrix:
    """Derivative of the truncated operator with respect to ``delta``.

    ``u^T D v = 4 delta^{-1-2s} (u, v - vbar)`` with ``vbar`` the mean of
    ``v(x - delta)`` and ``v(x + delta)``.  The shifted overlaps of hat
    functions are exact B-spline values, so ``D`` is symmetric.
    """
    _check_delta(q.delta)
    h = mesh.h
    n = mesh.n_dofs
    Delta = q.delta / h
    d = np.arange(n, dtype=float)
    shifted = 0.5 * (_b3(d + Delta) + _b3(d - Delta))
    row = 4.0 * q.delta ** (-1 - 2 * q.s) * h * (_b3(d) - shifted)
    return StiffnessMatrix(SymmetricToeplitz(scale * row), q, "delta-derivative")


def assemble_s_derivative_correction(
    mesh: Mesh1D, q: ParamPoint, quad: QuadratureConfig | None = None, scale: float = 1.0
) -> StiffnessMatrix:
    """``d/ds`` of the correction at fixed ``delta``."""
    _check_delta(q.delta)
    s, delta = q.s, q.delta
    M = mass_matrix(mesh).row
    coef = 2.0 * delta ** (-2 * s) * (1.0 + 2.0 * s * math.log(delta)) / s**2
    row = coef * M - 2.0 * _far_field_row(mesh, s, delta, quad, True)
    return StiffnessMatrix(SymmetricToeplitz(scale * row), q, "s-derivative-correction")


def assemble_s_derivative(mesh: Mesh1D, s: float, quad: QuadratureConfig | None = None, scale: float = 1.0) -> StiffnessMatrix:
    """Exact ``d/ds A(s, inf)``; a reference for the interpolated derivative."""
    _check_s(s)
    h = mesh.h
    n = mesh.n_dofs
    I = kernel_moments(n, s, 0.0, math.inf, "D", False, quad)
    IL = kernel_moments(n, s, 0.0, math.inf, "D", True, quad)
    row = 4.0 * h ** (1 - 2 * s) * (math.log(h) * I + IL)
    return StiffnessMatrix(SymmetricToeplitz(scale * row), ParamPoint(s), "s-derivative")


def dump_matrix(matrix, path) -> None:
    """Write a matrix as dense text, one row per line (debugging aid)."""
    dense = matrix.dense() if hasattr(matrix, "dense") else np.asarray(matrix)
    np.savetxt(path, dense, fmt="%.17g")
