"""State and adjoint solves with the interpolated operator.

``direct`` uses a dense Cholesky factorization for small systems and a
Levinson/Gohberg-Semencul Toeplitz solver otherwise; both are followed
by iterative refinement against an extended-precision residual so the
reported relative residual is reliable.  ``cg`` is Jacobi-preconditioned
conjugate gradients with FFT matrix-vector products.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .assembly import ParamPoint, StiffnessMatrix
from .toeplitz import SymmetricToeplitz, ToeplitzInverse

DENSE_LIMIT = 512
METHODS = ("direct", "cholesky", "cg")

_stats_lock = threading.Lock()
stats = {"factorizations": 0}


class SolverError(RuntimeError):
    """Raised when a solve fails or misses its tolerance."""


class NotPositiveDefiniteError(SolverError):
    pass


@dataclass
class SolveReport:
    """Result of a linear solve.

    ``residual_norm`` is ``||A x - b|| / ||b||`` (0 for ``b = 0``).
    ``floor`` estimates the smallest relative residual that a solution
    stored in double precision can have; a solve succeeds when the
    residual is below ``max(tol, floor)``.
    """

    solution: np.ndarray
    residual_norm: float
    method: str
    iterations: int = 0
    factor: "Factorization | None" = None
    floor: float = 0.0


def precision_floor(T: SymmetricToeplitz, x, bnorm: float) -> float:
    """``8 eps || |A| |x| || / ||b||``, the residual left by rounding ``x``."""
    absA = SymmetricToeplitz(np.abs(T.row))
    return 8.0 * np.finfo(float).eps * float(np.linalg.norm(absA.matvec(np.abs(x)))) / bnorm


class Factorization:
    """Reusable factorization of an SPD Toeplitz stiffness matrix."""

    def __init__(self, matrix, method: str = "direct"):
        T = matrix.entries if isinstance(matrix, StiffnessMatrix) else matrix
        if not isinstance(T, SymmetricToeplitz):
            T = SymmetricToeplitz(np.asarray(T)[0])
        self.T = T
        self.method = method
        if method == "cholesky" or (method == "direct" and T.n <= DENSE_LIMIT):
            try:
                self._cho = linalg.cho_factor(T.dense(), lower=True, check_finite=True)
            except linalg.LinAlgError as exc:
                raise NotPositiveDefiniteError("Cholesky factorization failed") from exc
            self._apply = lambda b: linalg.cho_solve(self._cho, b)
        elif method == "direct":
            try:
                inv = ToeplitzInverse(T)
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefiniteError(str(exc)) from exc
            self._apply = inv.solve
        else:
            raise ValueError(f"method {method!r} has no factorization")
        with _stats_lock:
            stats["factorizations"] += 1

    def residual(self, x, b) -> np.ndarray:
        return (np.asarray(b, dtype=np.longdouble) - self.T.matvec_exact(x)).astype(float)

    def solve(self, b, tol: float = 1e-10, max_refine: int = 5) -> SolveReport:
        b = np.asarray(b, dtype=float)
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return SolveReport(np.zeros_like(b), 0.0, "direct", 0, self)
        x = self._apply(b)
        floor = 0.0
        for it in range(max_refine + 1):
            r = self.residual(x, b)
            rel = float(np.linalg.norm(r) / bnorm)
            if not np.isfinite(rel):
                raise NotPositiveDefiniteError("non-finite solution; matrix is not positive definite")
            if rel <= tol:
                return SolveReport(x, rel, "direct", 0, self, floor)
            floor = precision_floor(self.T, x, bnorm)
            if rel <= floor:
                return SolveReport(x, rel, "direct", 0, self, floor)
            if it < max_refine:
                x = x + self._apply(r)
        raise SolverError(f"relative residual {rel:.2e} above tolerance {tol:.1e}")


def cg_solve(matrix, b, tol: float = 1e-10, max_iter: int | None = None) -> SolveReport:
    """Jacobi-preconditioned conjugate gradients."""
    T = matrix.entries if isinstance(matrix, StiffnessMatrix) else matrix
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveReport(np.zeros_like(b), 0.0, "cg", 0)
    diag = T.row[0]
    if diag <= 0:
        raise NotPositiveDefiniteError("non-positive diagonal")
    max_iter = max_iter or 10 * T.n
    x = np.zeros_like(b)
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = T.matvec(p)
        pAp = p @ Ap
        if pAp <= 0:
            raise NotPositiveDefiniteError("non-positive curvature in CG")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= 0.5 * tol * bnorm:
            true_r = b - T.matvec_exact(x).astype(float)
            rel = float(np.linalg.norm(true_r) / bnorm)
            floor = precision_floor(T, x, bnorm)
            if rel <= max(tol, floor):
                return SolveReport(x, rel, "cg", it, None, floor)
            r = true_r
        z = r / diag
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    rel = float(np.linalg.norm(b - T.matvec_exact(x).astype(float)) / bnorm)
    raise SolverError(f"CG did not converge in {max_iter} iterations (residual {rel:.2e})")


def solve_system(matrix, b, tol: float = 1e-10, method: str = "direct",
                 factor: Factorization | None = None) -> SolveReport:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method == "cg":
        return cg_solve(matrix, b, tol)
    factor = factor or Factorization(matrix, method)
    return factor.solve(b, tol)


def solve_state(family, q: ParamPoint, f_vec=None, tol: float = 1e-10,
                method: str = "direct") -> SolveReport:
    """Solve ``A(q) u = f``.

    The returned report carries the factorization (direct methods) so
    the adjoint solve at the same ``q`` can reuse it.
    """
    f_vec = family.rhs if f_vec is None else f_vec
    return solve_system(family.evaluate(q), f_vec, tol, method)


def solve_adjoint(family, q: ParamPoint, u_h, u_d, tol: float = 1e-10,
                  method: str = "direct", factor: Factorization | None = None) -> SolveReport:
    """Solve ``A(q) z = M (u_h - u_d)``; ``A`` is symmetric."""
    rhs = family.mass.matvec(np.asarray(u_h) - np.asarray(u_d))
    if method == "cg":
        return cg_solve(family.evaluate(q), rhs, tol)
    return solve_system(family.evaluate(q), rhs, tol, method, factor)
