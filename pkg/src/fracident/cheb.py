"""Piecewise Chebyshev interpolation in the fractional order ``s``.

The range of ``s`` is split into intervals whose length shrinks towards
``s = 1`` (where the operator family becomes singular).  On each interval
the family is interpolated at Chebyshev points; the polynomial order is
chosen from an a priori bound so that the interpolation error falls
below a tolerance ``eta``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EPS_REG = 1e-3
XI_LOWER, XI_UPPER = 0.1, 0.5


@dataclass(frozen=True)
class ChebSchedule:
    """Intervals, polynomial orders and nodes of a piecewise interpolant.

    Attributes
    ----------
    s_range : tuple of float
    xi : float
        Free parameter in ``(1/10, 1/2)`` trading interval length
        against order.
    eta : float
        Target tolerance (``nan`` when orders were prescribed).
    delta : float
        Horizon used in the error constants.
    intervals : tuple of (float, float)
    orders : tuple of int
        Polynomial degree ``M_k``; interval ``k`` has ``M_k + 1`` nodes.
    """

    s_range: tuple
    xi: float
    eta: float
    delta: float
    intervals: tuple
    orders: tuple
    eps_reg: float = EPS_REG

    @property
    def n_intervals(self) -> int:
        return len(self.intervals)

    @property
    def total_nodes(self) -> int:
        return int(sum(m + 1 for m in self.orders))

    def nodes(self, k: int) -> np.ndarray:
        lo, hi = self.intervals[k]
        return _map(_cheb_points(self.orders[k]), lo, hi)

    def all_nodes(self) -> list:
        return [self.nodes(k) for k in range(self.n_intervals)]

    def locate(self, s: float) -> int:
        """Index of the interval containing ``s`` (left-closed search)."""
        lo, hi = self.s_range
        if not (lo <= s <= hi):
            raise ValueError(f"s={s} outside interpolation range [{lo}, {hi}]")
        for k, (a, b) in enumerate(self.intervals):
            if s <= b:
                return k
        return self.n_intervals - 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("k,s_min,s_max,order,n_nodes\n")
        for k, ((a, b), m) in enumerate(zip(self.intervals, self.orders)):
            buf.write(f"{k},{a!r},{b!r},{m},{m + 1}\n")
        return buf.getvalue()


def _cheb_points(order: int) -> np.ndarray:
    # first-kind Chebyshev points on [-1, 1], decreasing
    m = np.arange(order + 1)
    return np.cos((2 * m + 1) * np.pi / (2 * order + 2))


def _bary_weights(order: int) -> np.ndarray:
    m = np.arange(order + 1)
    return (-1.0) ** m * np.sin((2 * m + 1) * np.pi / (2 * order + 2))


def _map(t, lo, hi):
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * t


def contraction_factor(xi: float) -> float:
    """``sigma = (1/xi - 2) / 8``, below one iff ``xi > 1/10``."""
    return (1.0 / xi - 2.0) / 8.0


def error_constant(s_min: float, delta: float, eps_reg: float = EPS_REG) -> float:
    """Constant in the interpolation error bound on an interval starting at ``s_min``."""
    if delta > 1.0:
        g = min(1.0 - s_min, 0.5 - eps_reg)
        return 4.0 * (math.exp(-1.0) + delta ** (g + 1.0))
    return 4.0 * math.exp(-1.0)


def _validate(s_range, eta, xi):
    lo, hi = s_range
    if not (0.0 < lo < hi < 1.0):
        raise ValueError("need 0 < s_min < s_max < 1")
    if not (XI_LOWER < xi < XI_UPPER):
        raise ValueError("xi must lie in the open interval (0.1, 0.5)")
    if not (eta > 0):
        raise ValueError("eta must be positive")


def subdivide(s_range, xi: float, eps_reg: float = EPS_REG) -> list:
    """Tile ``s_range`` with intervals of length ``(1/2 - xi) min(1 - s, 1/2 - eps_reg)``."""
    lo, hi = s_range
    out = []
    a = lo
    while True:
        length = (0.5 - xi) * min(1.0 - a, 0.5 - eps_reg)
        b = a + length
        if b >= hi:
            out.append((a, hi))
            return out
        out.append((a, b))
        a = b


def build_schedule(
    s_range: Sequence[float],
    delta: float,
    eta: float,
    xi: float,
    diam: float = 2.0,
    eps_reg: float = EPS_REG,
) -> ChebSchedule:
    """Construct intervals and orders meeting the tolerance ``eta``.

    ``delta = inf`` is replaced by the domain diameter ``diam`` in the
    error constants.
    """
    s_range = (float(s_range[0]), float(s_range[1]))
    _validate(s_range, eta, xi)
    d_eff = diam if math.isinf(delta) else float(delta)
    intervals = subdivide(s_range, xi, eps_reg)
    log_sigma = math.log(contraction_factor(xi))
    orders = []
    for a, _ in intervals:
        C = error_constant(a, d_eff, eps_reg)
        m = math.ceil(math.log(eta / C) / log_sigma) - 1
        orders.append(max(1, m))
    return ChebSchedule(s_range, float(xi), float(eta), float(delta), tuple(intervals), tuple(orders), eps_reg)


def fixed_order_schedule(s_range, xi: float, n_nodes: int, delta: float = math.inf,
                         eps_reg: float = EPS_REG) -> ChebSchedule:
    """Schedule with the same number of nodes on every interval."""
    s_range = (float(s_range[0]), float(s_range[1]))
    _validate(s_range, 1.0, xi)
    if n_nodes < 1:
        raise ValueError("need at least one node per interval")
    intervals = subdivide(s_range, xi, eps_reg)
    return ChebSchedule(s_range, float(xi), math.nan, float(delta), tuple(intervals),
                        tuple([n_nodes - 1] * len(intervals)), eps_reg)


def optimize_xi(s_range, delta: float, eta: float, n_grid: int = 64, diam: float = 2.0) -> float:
    """Grid search for the ``xi`` minimizing the total node count.

    Ties are broken towards larger ``xi`` (fewer, longer intervals).
    """
    pad = (XI_UPPER - XI_LOWER) / (2 * n_grid)
    grid = np.linspace(XI_LOWER + pad, XI_UPPER - pad, n_grid)
    counts = [build_schedule(s_range, delta, eta, xi, diam).total_nodes for xi in grid]
    best = min(counts)
    idx = max(i for i, c in enumerate(counts) if c == best)
    return float(grid[idx])


def lagrange_eval(schedule: ChebSchedule, s: float):
    """Lagrange basis values at ``s`` on the containing interval.

    Returns
    -------
    k : int
        Interval index.
    theta : ndarray
        Weights for the ``M_k + 1`` nodes, summing to one.
    """
    k = schedule.locate(s)
    order = schedule.orders[k]
    nodes = schedule.nodes(k)
    hit = np.nonzero(nodes == s)[0]
    theta = np.zeros(order + 1)
    if hit.size:
        theta[hit[0]] = 1.0
        return k, theta
    w = _bary_weights(order) / (s - nodes)
    return k, w / w.sum()


def lagrange_deriv(schedule: ChebSchedule, s: float):
    """Derivatives of the Lagrange basis at ``s``.

    Returns ``(k, dtheta)`` with ``dtheta`` summing to zero.
    """
    k = schedule.locate(s)
    order = schedule.orders[k]
    nodes = schedule.nodes(k)
    bw = _bary_weights(order)
    n = order + 1
    hit = np.nonzero(nodes == s)[0]
    if hit.size:
        j = hit[0]
        dtheta = np.zeros(n)
        others = np.arange(n) != j
        dtheta[others] = (bw[others] / bw[j]) / (s - nodes[others])
        dtheta[j] = -dtheta[others].sum()
        return k, dtheta
    _, theta = lagrange_eval(schedule, s)
    inv = 1.0 / (s - nodes)
    # sum over j != m of 1/(s - s_j), without cancellation near a node
    off = np.ones((n, n)) - np.eye(n)
    return k, theta * (off @ inv)
