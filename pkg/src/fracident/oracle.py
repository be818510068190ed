"""Reference quantities for testing: analytic solutions, brute-force
quadrature of matrix entries, noise and finite differences.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .assembly import ParamPoint
from .mesh_fem import Mesh1D


@dataclass(frozen=True)
class TestProblem:
    """Identification benchmark.

    Problem ``"I"`` is the scaled fractional Laplacian (infinite horizon)
    with a known solution; problem ``"II"`` is the unscaled truncated
    kernel with data generated by the discrete model itself.
    """

    __test__ = False  # not a pytest class

    id: str
    s_star: float
    delta_star: float = math.inf

    def __post_init__(self):
        if self.id not in ("I", "II"):
            raise ValueError("problem id must be 'I' or 'II'")
        if self.id == "I" and math.isfinite(self.delta_star):
            raise ValueError("problem I has infinite horizon")
        if self.id == "II" and not math.isfinite(self.delta_star):
            raise ValueError("problem II needs a finite horizon")

    @property
    def scaled(self) -> bool:
        return self.id == "I"

    @property
    def q_star(self) -> ParamPoint:
        return ParamPoint(self.s_star, self.delta_star)

    @staticmethod
    def f(x):
        return np.ones_like(np.asarray(x, dtype=float))


def scaling_constant(n: int, s: float) -> float:
    """Normalization ``C_{n,s}`` of the fractional Laplacian."""
    return float(
        2.0 ** (2 * s) * s * special.gamma(s + n / 2) / (math.pi ** (n / 2) * special.gamma(1 - s))
    )


def kernel_scale(s: float) -> float:
    """Kernel factor in 1D, ``C_{1,s} / 2``.

    The factor 1/2 accounts for the bilinear form integrating over both
    orderings of ``(x, y)``.
    """
    return 0.5 * scaling_constant(1, s)


def scaling_constant_ds(n: int, s: float) -> float:
    """Derivative of :func:`scaling_constant` in ``s``."""
    dlog = 2 * math.log(2.0) + 1.0 / s + special.digamma(s + n / 2) + special.digamma(1.0 - s)
    return scaling_constant(n, s) * float(dlog)


def kernel_scale_ds(s: float) -> float:
    """Derivative of :func:`kernel_scale` in ``s``."""
    return 0.5 * scaling_constant_ds(1, s)


def getoor_constant(n: int, s: float) -> float:
    return float(special.gamma(n / 2) / (2 ** (2 * s) * special.gamma((n + 2 * s) / 2) * special.gamma(1 + s)))


def getoor_solution(n: int, s: float) -> Callable:
    """Solution of the fractional Poisson problem with unit load on the unit ball."""
    if n != 1:
        raise NotImplementedError("only n = 1 is supported")
    c = getoor_constant(n, s)

    def u(x):
        x = np.asarray(x, dtype=float)
        return c * np.maximum(1.0 - x * x, 0.0) ** s

    return u


def getoor_energy(s: float) -> float:
    """``a(u, u) = (1, u)`` for the 1D solution, i.e. its integral."""
    return getoor_constant(1, s) * math.sqrt(math.pi) * math.gamma(1 + s) / math.gamma(s + 1.5)


# --- brute-force entries ----------------------------------------------------

@lru_cache(maxsize=1)
def _integrand():
    from numba import carray, cfunc, types
    from scipy import LowLevelCallable

    sig = types.double(types.intc, types.CPointer(types.double))

    @cfunc(sig)
    def f(n, xx):
        a = carray(xx, n)
        y, x, ci, cj, h, s = a[0], a[1], a[2], a[3], a[4], a[5]
        if x == y:
            return 0.0
        pix = max(0.0, 1.0 - abs(x - ci) / h)
        piy = max(0.0, 1.0 - abs(y - ci) / h)
        pjx = max(0.0, 1.0 - abs(x - cj) / h)
        pjy = max(0.0, 1.0 - abs(y - cj) / h)
        return (pix - piy) * (pjx - pjy) * abs(x - y) ** (-1.0 - 2.0 * s)

    return LowLevelCallable(f.ctypes)


class OracleToleranceError(RuntimeError):
    pass


def brute_force_entry(mesh: Mesh1D, i: int, j: int, q: ParamPoint, tol: float = 1e-9) -> float:
    """``a(phi_i, phi_j; q)`` by nested adaptive quadrature.

    ``i, j`` index interior nodes (0-based).  The inner integral is split
    at ``y = x`` and clipped to the strip ``|x - y| < delta``; the outer
    one is split at mesh nodes and at the points where the strip edges
    cross element boundaries.  Contributions with ``y`` outside the
    domain use the closed-form tail of the kernel.
    """
    if mesh.n_elem > 16:
        raise ValueError("brute force is limited to n_elem <= 16")
    f = _integrand()
    h, s, delta = mesh.h, q.s, q.delta
    nodes = mesh.nodes
    ci, cj = nodes[i + 1], nodes[j + 1]
    a, b = mesh.a, mesh.b
    worst = [0.0]

    def quad(fun, lo, hi, args=(), points=None):
        pts = sorted(p for p in (points or []) if lo < p < hi) or None
        # QUADPACK roundoff warnings are expected for tiny integrals; the
        # returned error estimate is checked instead
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(fun, lo, hi, args=args, points=pts, epsabs=tol * 1e-2,
                                      epsrel=1e-12, limit=400)[:2]
        worst[0] = max(worst[0], err)
        return val

    total = 0.0
    for k in range(mesh.n_elem):
        xa, xb = nodes[k], nodes[k + 1]
        for l in range(mesh.n_elem):
            ya, yb = nodes[l], nodes[l + 1]

            def inner(x, ya=ya, yb=yb):
                lo, hi = ya, yb
                if math.isfinite(delta):
                    lo, hi = max(lo, x - delta), min(hi, x + delta)
                if hi <= lo:
                    return 0.0
                return quad(f, lo, hi, args=(x, ci, cj, h, s), points=[x])

            cuts = [ya, yb]
            if math.isfinite(delta):
                cuts += [ya - delta, yb - delta, ya + delta, yb + delta]
            total += quad(inner, xa, xb, points=cuts)

    def tail(x):
        t = 0.0
        for dist in (x - a, b - x):
            if math.isinf(delta):
                t += dist ** (-2 * s) / (2 * s)
            elif dist < delta:
                t += (dist ** (-2 * s) - delta ** (-2 * s)) / (2 * s)
        return t

    def ext(x):
        pi = max(0.0, 1.0 - abs(x - ci) / h)
        pj = max(0.0, 1.0 - abs(x - cj) / h)
        return pi * pj * tail(x)

    cuts = list(nodes[1:-1])
    if math.isfinite(delta):
        cuts += [a + delta, b - delta]
    # y outside (a, b): both orderings of (x, y) contribute
    total += 2.0 * quad(ext, a, b, points=cuts)
    if worst[0] > tol:
        raise OracleToleranceError(f"quadrature error estimate {worst[0]:.2e} exceeds {tol:.1e}")
    return total


# --- data perturbation and finite differences ---------------------------------

def add_noise(u_d, sigma: float, seed: int = 0) -> np.ndarray:
    """Add i.i.d. ``N(0, sigma^2)`` noise from a seeded generator.

    The same seed gives the same standard-normal draw for every
    ``sigma``, so perturbations at different levels are proportional.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    u_d = np.asarray(u_d, dtype=float)
    if sigma == 0:
        return u_d.copy()
    z = np.random.default_rng(seed).standard_normal(u_d.shape)
    return u_d + sigma * z


def _default_feasible(x):
    x = np.atleast_1d(x)
    ok = 0.0 < x[0] < 1.0
    if x.size > 1:
        ok = ok and x[1] > 0.0
    return ok


def fd_gradient(fun: Callable, q: Sequence[float], step: float = 1e-5,
                feasible: Callable | None = None) -> np.ndarray:
    """Central finite-difference gradient of ``fun`` at ``q``.

    If a stencil point is infeasible the step is halved once; if it is
    still infeasible a ``ValueError`` is raised.
    """
    feasible = feasible or _default_feasible
    x = np.array(q, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = step
        for attempt in range(2):
            e = np.zeros_like(x)
            e[i] = h
            if feasible(x + e) and feasible(x - e):
                break
            h *= 0.5
        else:
            raise ValueError(f"finite-difference stencil infeasible in direction {i}")
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g
