"""Reduced cost functional, adjoint gradient and a BFGS driver."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import ParamPoint
from .solve import solve_adjoint, solve_state


@dataclass(frozen=True)
class Regularizer:
    """Barrier ``R(s, delta) = alpha / (s (1 - s)) + beta e^delta / delta``.

    The ``delta`` term is dropped when ``beta = 0`` or the horizon is
    infinite.
    """

    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    def value(self, q: ParamPoint) -> float:
        s = q.s
        r = self.alpha / (s * (1.0 - s))
        if q.finite and self.beta > 0:
            r += self.beta * math.exp(q.delta) / q.delta
        return r

    def grad_s(self, s: float) -> float:
        return self.alpha * (2.0 * s - 1.0) / (s * s * (1.0 - s) ** 2)

    def grad_delta(self, delta: float) -> float:
        return self.beta * math.exp(delta) * (delta - 1.0) / delta**2

    def gradient(self, q: ParamPoint) -> np.ndarray:
        if q.finite:
            return np.array([self.grad_s(q.s), self.grad_delta(q.delta)])
        return np.array([self.grad_s(q.s)])


class ReducedFunctional:
    """``j(q) = 1/2 ||u(q) - u_d||_M^2 + R(q)`` with an adjoint gradient.

    The state and its factorization at the most recent ``q`` are kept so
    a gradient following a cost evaluation costs one extra solve.
    """

    def __init__(self, family, u_d, reg: Regularizer, tol: float = 1e-10, method: str = "direct"):
        self.family = family
        self.u_d = np.asarray(u_d, dtype=float)
        self.reg = reg
        self.tol = tol
        self.method = method
        self.n_evals = 0
        self.n_grads = 0
        self.evaluated = []
        self._last = None

    def _state(self, q: ParamPoint):
        if self._last is not None and self._last[0] == q:
            return self._last[1]
        rep = solve_state(self.family, q, tol=self.tol, method=self.method)
        self._last = (q, rep)
        return rep

    def value(self, q: ParamPoint) -> float:
        u = self._state(q).solution
        diff = u - self.u_d
        j = 0.5 * self.family.mass.quad_form(diff) + self.reg.value(q)
        self.n_evals += 1
        self.evaluated.append((q, j))
        return j

    def gradient(self, q: ParamPoint) -> np.ndarray:
        if not q.finite and self.reg.beta > 0:
            raise ValueError("delta-gradient requested at infinite horizon")
        rep = self._state(q)
        u = rep.solution
        z = solve_adjoint(self.family, q, u, self.u_d, self.tol, self.method, rep.factor).solution
        self.n_grads += 1
        g = self.reg.gradient(q)
        g[0] -= self.family.evaluate_ds(q).quad_form(u, z)
        if q.finite:
            g[1] -= self.family.evaluate_ddelta(q).quad_form(u, z)
        return g


def cost(family, q: ParamPoint, u_d, reg: Regularizer, **kw) -> float:
    return ReducedFunctional(family, u_d, reg, **kw).value(q)


def gradient(family, q: ParamPoint, u_d, reg: Regularizer, **kw) -> np.ndarray:
    return ReducedFunctional(family, u_d, reg, **kw).gradient(q)


@dataclass
class IterateRecord:
    iteration: int
    q: ParamPoint
    cost: float
    grad_norm: float
    n_evals: int


@dataclass
class IdentifyRun:
    """BFGS trajectory and outcome."""

    iterates: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)
    n_functional_evals: int = 0
    n_iterations: int = 0
    final_q: ParamPoint | None = None
    converged: bool = False
    message: str = ""

    @property
    def final_grad_norm(self) -> float:
        return self.iterates[-1].grad_norm if self.iterates else math.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("iter,s,delta,cost,grad_norm,n_evals\n")
        for r in self.iterates:
            buf.write(f"{r.iteration},{r.q.s!r},{r.q.delta!r},{r.cost!r},{r.grad_norm!r},{r.n_evals}\n")
        return buf.getvalue()


def _feasible_box(family):
    lo, hi = family.schedule.s_range

    def ok(x):
        if not (lo <= x[0] <= hi and 0.0 < x[0] < 1.0):
            return False
        return x.size == 1 or (x[1] > 0.0 and math.isfinite(x[1]))

    return ok


def bfgs_identify(family, q0: ParamPoint, u_d, reg: Regularizer, grad_tol: float = 1e-8,
                  max_iter: int = 200, c1: float = 1e-4, backtrack: float = 0.5,
                  max_backtracks: int = 40, solver_tol: float = 1e-10,
                  method: str = "direct") -> IdentifyRun:
    """Minimize the reduced functional with BFGS.

    The inverse Hessian starts as ``I / max(1, ||g0||)`` and is rescaled
    by ``y's / y'y`` before the first update.  Trial points outside the
    admissible set (including the interpolation range) are rejected like
    an Armijo failure.  The horizon is optimized only when ``q0`` has a
    finite ``delta``.
    """
    fun = ReducedFunctional(family, u_d, reg, solver_tol, method)
    feasible = _feasible_box(family)
    two_d = q0.finite

    def to_q(x):
        return ParamPoint(x[0], x[1]) if two_d else ParamPoint(x[0])

    x = np.array([q0.s, q0.delta] if two_d else [q0.s])
    if not feasible(x):
        raise ValueError("initial point is infeasible")
    run = IdentifyRun()
    f = fun.value(to_q(x))
    g = fun.gradient(to_q(x))
    H = np.eye(x.size) / max(1.0, float(np.linalg.norm(g)))
    first_update = True
    run.iterates.append(IterateRecord(0, to_q(x), f, float(np.linalg.norm(g)), fun.n_evals))
    it = 0
    while True:
        gnorm = float(np.linalg.norm(g))
        if gnorm < grad_tol:
            run.converged = True
            run.message = "gradient tolerance reached"
            break
        if it >= max_iter:
            run.message = "maximum iterations reached"
            break
        p = -H @ g
        slope = float(g @ p)
        if slope >= 0:
            # lost descent; restart from scaled identity
            H = np.eye(x.size) / max(1.0, gnorm)
            p = -H @ g
            slope = float(g @ p)
        t = 1.0
        accepted = False
        for _ in range(max_backtracks + 1):
            xt = x + t * p
            if feasible(xt):
                ft = fun.value(to_q(xt))
                if ft <= f + c1 * t * slope and ft < f:
                    accepted = True
                    break
            t *= backtrack
        if not accepted:
            run.message = "line search failed"
            break
        gt = fun.gradient(to_q(xt))
        sk = xt - x
        yk = gt - g
        sy = float(sk @ yk)
        if sy > 1e-300:
            if first_update:
                H = np.eye(x.size) * (sy / float(yk @ yk))
                first_update = False
            rho = 1.0 / sy
            V = np.eye(x.size) - rho * np.outer(sk, yk)
            H = V @ H @ V.T + rho * np.outer(sk, sk)
        x, f, g = xt, ft, gt
        it += 1
        run.iterates.append(IterateRecord(it, to_q(x), f, float(np.linalg.norm(g)), fun.n_evals))
    run.n_iterations = it
    run.n_functional_evals = fun.n_evals
    run.evaluations = list(fun.evaluated)
    run.final_q = to_q(x)
    return run
