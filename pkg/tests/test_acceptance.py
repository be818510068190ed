"""End-to-end acceptance checks.

Each test records one PASS/FAIL line, repeated in the terminal summary.
The identification runs on the finest meshes share one operator family
per mesh and take a few minutes in total.
"""

import math
import time

import numpy as np
import pytest

from fracident import assembly
from fracident.assembly import ParamPoint
from fracident.config import ExperimentConfig
from fracident.experiments import (
    FLOOR_TOL,
    build_family,
    check_exponential_decay,
    n_elem_for_level,
    run_convergence,
    run_gradcheck,
    run_identify,
    run_interp_study,
)
from fracident.cheb import fixed_order_schedule
from fracident.mesh_fem import build_mesh
from fracident.opfamily import precompute
from fracident.oracle import brute_force_entry

pytestmark = pytest.mark.slow

Q_GRID = [(s, d) for s in (0.25, 0.5, 0.75) for d in (0.5, 0.9, 1.5, 2.5)]

# reference recoveries for problem II
REF_MESH = {10: (0.74976, 0.90306), 11: (0.74976, 0.90332), 12: (0.74976, 0.90329)}
REF_REG = {(5e-6, 1e-5): (0.7478, 0.92978), (5e-7, 1e-6): (0.74976, 0.90329),
          (5e-8, 1e-7): (0.74998, 0.90034)}
SIGMAS = (2.0**-2, 2.0**-3, 2.0**-4, 2.0**-5)


def _rel_max(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


# --- shared identification runs -------------------------------------------------

_families = {}


def _family(level):
    if level not in _families:
        cfg = ExperimentConfig(problem="II", n_elem=n_elem_for_level(level)).resolved()
        _families[level] = build_family(cfg)
    return _families[level]


_runs = {}


def _identify_ii(level=12, alpha=5e-7, beta=1e-6, sigma=0.0):
    key = (level, alpha, beta, sigma)
    if key not in _runs:
        cfg = ExperimentConfig(problem="II", n_elem=n_elem_for_level(level), alpha=alpha, beta=beta,
                               sigma=sigma, seed=0)
        _runs[key] = run_identify(cfg, family=_family(level), write=False)
    return _runs[key]


def _sq(res):
    return res.summary["s"], res.summary["delta"]


# --- criteria ---------------------------------------------------------------------

def test_c01_splitting_identity(criterion):
    t0 = time.perf_counter()
    m = build_mesh(-1, 1, 8)
    worst = 0.0
    for s, d in Q_GRID:
        A = assembly.assemble_truncated_direct(m, ParamPoint(s, d)).dense()
        B = assembly.assemble_infinite(m, s).dense() + assembly.assemble_correction(m, s, d).dense()
        worst = max(worst, _rel_max(B, A))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-6 and secs < 60
    assert criterion(1, ok, f"max rel diff {worst:.2e} (<= 1e-6), {secs:.1f}s")


def test_c02_oracle_equivalence(criterion):
    t0 = time.perf_counter()
    m = build_mesh(-1, 1, 4)
    n = m.n_dofs
    worst = 0.0
    for s in (0.25, 0.5, 0.75):
        for d in (0.6, math.inf):
            q = ParamPoint(s, d)
            A = assembly.assemble_infinite(m, s).dense()
            if q.finite:
                A = A + assembly.assemble_correction(m, s, d).dense()
            for i in range(n):
                for j in range(n):
                    ref = brute_force_entry(m, i, j, q)
                    worst = max(worst, abs(A[i, j] - ref) / abs(ref))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-6 and secs < 300
    assert criterion(2, ok, f"max entry rel err {worst:.2e} (<= 1e-6), {secs:.1f}s")


def test_c03_gradient(criterion):
    t0 = time.perf_counter()
    res = run_gradcheck(ExperimentConfig(problem="II", n_elem=64), n_points=10, write=False)
    secs = time.perf_counter() - t0
    ok = res.max_rel_err <= 1e-4 and len(res.rows) == 10 and secs < 120
    assert criterion(3, ok, f"max rel err {res.max_rel_err:.2e} over 10 points (<= 1e-4), {secs:.1f}s")


def test_c04_delta_derivative(criterion):
    m = build_mesh(-1, 1, 8)
    fam = precompute(m, fixed_order_schedule((0.05, 0.95), 0.3, 8))
    eps = 1e-5
    worst = 0.0
    for s, d in Q_GRID:
        fd = (assembly.assemble_correction(m, s, d + eps).row
              - assembly.assemble_correction(m, s, d - eps).row) / (2 * eps)
        worst = max(worst, _rel_max(fam.evaluate_ddelta(ParamPoint(s, d)).row, fd))
    assert criterion(4, worst <= 1e-4, f"max rel err {worst:.2e} (<= 1e-4)")


def test_c05_discretization_rate(criterion):
    t0 = time.perf_counter()
    res = run_convergence(ExperimentConfig(problem="I", s_star=0.5, levels=(4, 5, 6, 7, 8, 9)), write=False)
    secs = time.perf_counter() - t0
    ok = 0.45 <= res.rate_Hs <= 0.65 and secs < 600
    assert criterion(5, ok, f"energy rate {res.rate_Hs:.4f} in [0.45, 0.65], {secs:.1f}s")


def test_c06_interpolation_convergence(criterion):
    cfg = ExperimentConfig(problem="I", n_elem=n_elem_for_level(8), m_list=tuple(range(1, 13)))
    res = run_interp_study(cfg, write=False)
    errors = [r[1] for r in res.rows if r[0] <= 12]
    decay = check_exponential_decay(errors, FLOOR_TOL, factor=3.0)
    ok = decay and res.node_r2 >= 0.95
    assert criterion(6, ok, f"errors {errors[0]:.1e} -> {min(errors):.1e}, factor >= 3 until "
                            f"{FLOOR_TOL:.0e}: {decay}; node-count R^2 {res.node_r2:.4f} (>= 0.95)")


def test_c07_identify_problem_i(criterion):
    cfg = ExperimentConfig(problem="I", n_elem=n_elem_for_level(10), alpha=5e-7, q0=(0.1,))
    res = run_identify(cfg, write=False)
    s = res.summary["s"]
    g = res.run.final_grad_norm
    ok = abs(s - 0.5) <= 1e-3 and res.run.converged and g < 1e-8
    assert criterion(7, ok, f"s={s:.6f} (0.5 +- 1e-3), |grad|={g:.1e}, converged={res.run.converged}")


def test_c08_identify_problem_ii(criterion):
    t0 = time.perf_counter()
    res = _identify_ii(12)
    secs = time.perf_counter() - t0
    s, d = _sq(res)
    it = res.summary["iterations"]
    s_ref, d_ref = REF_MESH[12]
    ok = (abs(s - s_ref) <= 5e-3 and abs(d - d_ref) <= 5e-3 and 10 <= it <= 60
          and res.run.converged and secs < 1800)
    assert criterion(8, ok, f"(s, delta)=({s:.5f}, {d:.5f}) vs (0.74976, 0.90329) +- 5e-3, "
                            f"{it} iterations, {secs:.0f}s")


def test_c09_regularization(criterion):
    order = [(5e-6, 1e-5), (5e-7, 1e-6), (5e-8, 1e-7)]
    got = {ab: _sq(_identify_ii(12, *ab)) for ab in order}
    close = all(abs(got[ab][0] - REF_REG[ab][0]) <= 5e-3 and abs(got[ab][1] - REF_REG[ab][1]) <= 5e-3
                for ab in ((5e-6, 1e-5), (5e-8, 1e-7)))
    dist_s = [abs(got[ab][0] - 0.75) for ab in order]
    dist_d = [abs(got[ab][1] - 0.9) for ab in order]
    mono = all(np.diff(dist_s) < 0) and all(np.diff(dist_d) < 0)
    rows = ", ".join(f"a={ab[0]:.0e}: ({got[ab][0]:.5f}, {got[ab][1]:.5f})" for ab in order)
    assert criterion(9, close and mono, f"{rows}; within 5e-3: {close}; monotone: {mono}")


def _inversions(values):
    return int(np.sum(np.diff(values) < 0))


def test_c10_noise_trend(criterion):
    s0, d0 = _sq(_identify_ii(12))
    qs = [_sq(_identify_ii(12, sigma=sg)) for sg in SIGMAS]
    # distance to the noise-free values should shrink as sigma decreases
    dist_s = [-abs(s - s0) for s, _ in qs]
    dist_d = [-abs(d - d0) for _, d in qs]
    trend = _inversions(dist_s) + _inversions(dist_d) <= 1
    s5, d5 = qs[-1]
    near = abs(s5 - 0.752) <= 2e-2 and abs(d5 - 0.875) <= 5e-2
    rows = ", ".join(f"({s:.4f}, {d:.4f})" for s, d in qs)
    assert criterion(10, trend and near, f"sigma=2^-2..2^-5: {rows}; trend: {trend}; "
                                         f"last within (2e-2, 5e-2) of (0.752, 0.875): {near}")


def test_c11_mesh_independence(criterion):
    its = {lev: _identify_ii(lev).summary["iterations"] for lev in (10, 11, 12)}
    ratio = max(its.values()) / min(its.values())
    conv = all(_identify_ii(lev).run.converged for lev in its)
    assert criterion(11, ratio <= 2 and conv, f"iterations {its} (max/min {ratio:.2f} <= 2)")
