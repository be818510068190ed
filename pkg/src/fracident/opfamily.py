"""Affine operator family ``q -> A(q)`` built on Chebyshev interpolation.

The infinite-horizon operator is interpolated in ``s`` from matrices
precomputed at the schedule nodes.  A finite horizon is added back
through the correction term, which is cheap to assemble and is memoized
by exact parameter values.
"""

from __future__ import annotations

import math
import os
import threading
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import assembly
from .assembly import ParamPoint, QuadratureConfig, StiffnessMatrix
from .cheb import ChebSchedule, lagrange_deriv, lagrange_eval
from .mesh_fem import Mesh1D, load_vector, mass_matrix
from .oracle import scaling_constant, scaling_constant_ds
from .toeplitz import SymmetricToeplitz

CACHE_SIZE = 64


def thread_count() -> int:
    """Worker threads, capped by ``FRACIDENT_THREADS`` when set."""
    n = os.cpu_count() or 1
    env = os.environ.get("FRACIDENT_THREADS")
    if env:
        n = max(1, min(n, int(env)))
    return n


def kernel_factor(s: float, scaled: bool, factor: float = 1.0) -> float:
    """Multiplier of the plain kernel ``|x-y|^{-1-2s}``."""
    return factor * scaling_constant(1, s) if scaled else factor


class _LRU:
    """Small thread-safe LRU map."""

    def __init__(self, maxsize):
        self.maxsize = maxsize
        self._data = OrderedDict()
        self._lock = threading.Lock()

    def get_or_create(self, key, factory):
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                return self._data[key]
        value = factory()
        with self._lock:
            # another thread may have inserted the same key meanwhile
            if key in self._data:
                return self._data[key]
            self._data[key] = value
            if len(self._data) > self.maxsize:
                self._data.popitem(last=False)
            return value

    def __len__(self):
        return len(self._data)

    def __contains__(self, key):
        return key in self._data


class OperatorFamily:
    """Interpolated stiffness matrices ``A(s, delta)`` and their derivatives.

    Use :func:`precompute` to construct an instance.

    Attributes
    ----------
    mesh : Mesh1D
    schedule : ChebSchedule
    quad : QuadratureConfig
    scaled : bool
        Whether the kernel carries the fractional Laplacian constant.
    factor : float
        Constant kernel multiplier.  ``0.5`` turns the full-plane double
        integral into the symmetric form ``1/2 int int``.
    node_rows : list of ndarray
        For interval ``k`` an array ``(M_k + 1, N)`` of first rows of
        the (scaled) node matrices.
    mass : SymmetricToeplitz
    rhs : ndarray
        Load vector of the unit forcing.
    timings : list of (phase, N, seconds)
    """

    def __init__(self, mesh: Mesh1D, schedule: ChebSchedule, quad: QuadratureConfig,
                 node_rows, scaled: bool = False, factor: float = 1.0):
        self.mesh = mesh
        self.schedule = schedule
        self.quad = quad
        self.scaled = scaled
        self.factor = float(factor)
        self.node_rows = node_rows
        self.mass = mass_matrix(mesh)
        self.rhs = load_vector(mesh, lambda x: np.ones_like(x))
        self.timings = []
        self._cache = _LRU(CACHE_SIZE)

    @property
    def n_nodes(self) -> int:
        return sum(r.shape[0] for r in self.node_rows)

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_dofs

    def scale(self, s: float) -> float:
        return kernel_factor(s, self.scaled, self.factor)

    def scale_ds(self, s: float) -> float:
        return self.factor * scaling_constant_ds(1, s) if self.scaled else 0.0

    def node_matrix(self, k: int, m: int) -> StiffnessMatrix:
        s_m = float(self.schedule.nodes(k)[m])
        return StiffnessMatrix(SymmetricToeplitz(self.node_rows[k][m]), ParamPoint(s_m), "infinite-horizon")

    # memoized pieces ------------------------------------------------------

    def correction(self, q: ParamPoint) -> StiffnessMatrix:
        """``kappa(s) C(s, delta)``."""
        def make():
            return assembly.assemble_correction(self.mesh, q.s, q.delta, self.quad, self.scale(q.s))
        return self._cache.get_or_create(("C",) + q.key, make)

    def correction_ds(self, q: ParamPoint) -> StiffnessMatrix:
        """``d/ds [kappa(s) C(s, delta)]``."""
        def make():
            dC = assembly.assemble_s_derivative_correction(self.mesh, q, self.quad)
            row = self.scale(q.s) * dC.row
            if self.scaled:
                C = assembly.assemble_correction(self.mesh, q.s, q.delta, self.quad)
                row = row + self.scale_ds(q.s) * C.row
            return StiffnessMatrix(SymmetricToeplitz(row), q, "s-derivative-correction")
        return self._cache.get_or_create(("dsC",) + q.key, make)

    def delta_derivative(self, q: ParamPoint) -> StiffnessMatrix:
        def make():
            return assembly.assemble_delta_derivative(self.mesh, q, self.scale(q.s))
        return self._cache.get_or_create(("dC",) + q.key, make)

    # evaluation -------------------------------------------------------------

    def interpolated_row(self, s: float) -> np.ndarray:
        k, theta = lagrange_eval(self.schedule, s)
        hit = np.nonzero(theta == 1.0)[0]
        if hit.size == 1 and np.count_nonzero(theta) == 1:
            return self.node_rows[k][hit[0]].copy()
        return theta @ self.node_rows[k]

    def evaluate(self, q: ParamPoint) -> StiffnessMatrix:
        row = self.interpolated_row(q.s)
        if not q.finite:
            return StiffnessMatrix(SymmetricToeplitz(row), q, "infinite-horizon")
        return StiffnessMatrix(SymmetricToeplitz(row + self.correction(q).row), q, "full")

    def evaluate_ds(self, q: ParamPoint) -> StiffnessMatrix:
        k, dtheta = lagrange_deriv(self.schedule, q.s)
        row = dtheta @ self.node_rows[k]
        if q.finite:
            row = row + self.correction_ds(q).row
        return StiffnessMatrix(SymmetricToeplitz(row), q, "s-derivative")

    def evaluate_ddelta(self, q: ParamPoint) -> StiffnessMatrix:
        if not q.finite:
            raise ValueError("delta-derivative is undefined at infinite horizon")
        return self.delta_derivative(q)


def default_eta(mesh: Mesh1D, s_min: float, delta_min: float = math.inf,
                quad: QuadratureConfig | None = None) -> float:
    """Tolerance ``0.5 h^{1/2} c`` tied to the discretization error.

    ``c`` estimates the coercivity of the truncated form relative to the
    infinite-horizon energy norm: the smallest generalized eigenvalue of
    ``(A(s_min, delta_min), A(s_min, inf))`` on a coarse mesh of the same
    domain.  It equals one for an infinite horizon.
    """
    from scipy import linalg

    c = 1.0
    if math.isfinite(delta_min):
        coarse = Mesh1D(mesh.a, mesh.b, min(mesh.n_elem, 64))
        A_inf = assembly.assemble_infinite(coarse, s_min, quad)
        C = assembly.assemble_correction(coarse, s_min, delta_min, quad)
        A = A_inf.dense() + C.dense()
        c = float(linalg.eigh(A, A_inf.dense(), eigvals_only=True, subset_by_index=[0, 0])[0])
    return 0.5 * math.sqrt(mesh.h) * c


def precompute(mesh: Mesh1D, schedule: ChebSchedule, quad: QuadratureConfig | None = None,
               scaled: bool = False, factor: float = 1.0,
               threads: int | None = None) -> OperatorFamily:
    """Assemble ``A(s_m, inf)`` at every schedule node.

    Parameters
    ----------
    scaled : bool
        Multiply each node matrix by the fractional Laplacian constant
        for its ``s_m``.  The scaled family is smoother in ``s`` and is
        what gets interpolated.
    factor : float
        Constant kernel multiplier, see :class:`OperatorFamily`.
    threads : int, optional
        Worker count; defaults to :func:`thread_count`.
    """
    quad = quad or QuadratureConfig()
    jobs = [(k, float(s)) for k in range(schedule.n_intervals) for s in schedule.nodes(k)]

    def work(job):
        s = job[1]
        return kernel_factor(s, scaled, factor) * assembly.infinite_row(mesh, s, quad)

    t0 = time.perf_counter()
    nthreads = threads or thread_count()
    if nthreads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(nthreads) as ex:
            rows = list(ex.map(work, jobs))
    else:
        rows = [work(j) for j in jobs]
    elapsed = time.perf_counter() - t0
    node_rows = []
    i = 0
    for k in range(schedule.n_intervals):
        cnt = schedule.orders[k] + 1
        block = np.array(rows[i:i + cnt])
        block.setflags(write=False)
        node_rows.append(block)
        i += cnt
    fam = OperatorFamily(mesh, schedule, quad, node_rows, scaled, factor)
    fam.timings.append(("precompute", mesh.n_dofs, elapsed))
    return fam


def evaluate(family: OperatorFamily, q: ParamPoint) -> StiffnessMatrix:
    return family.evaluate(q)


def evaluate_ds(family: OperatorFamily, q: ParamPoint) -> StiffnessMatrix:
    return family.evaluate_ds(q)


def evaluate_ddelta(family: OperatorFamily, q: ParamPoint) -> StiffnessMatrix:
    return family.evaluate_ddelta(q)
