"""Runners behind the command line subcommands.

Every runner takes an :class:`ExperimentConfig`, writes its CSV files
and returns a result object whose ``ok`` flag decides the exit code.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass

import numpy as np

from . import assembly
from .assembly import ParamPoint, QuadratureConfig
from .cheb import build_schedule, fixed_order_schedule, optimize_xi
from .config import ExperimentConfig, sibling, write_csv
from .control import ReducedFunctional, Regularizer, bfgs_identify
from .mesh_fem import Mesh1D, build_mesh, interpolate, l2_error, mass_matrix, p1_values
from .opfamily import default_eta, kernel_factor, precompute
from .oracle import add_noise, fd_gradient, getoor_energy, getoor_solution
from .solve import solve_state, solve_system

DOMAIN = (-1.0, 1.0)
# relative energy-norm level treated as the quadrature/round-off floor
FLOOR_TOL = 1e-10


def n_elem_for_level(level: int) -> int:
    """Element count giving ``h = 2^-level`` on the default domain."""
    return int(round((DOMAIN[1] - DOMAIN[0]) * 2**level))


def fit_rate(h, err) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def resolve_schedule(cfg: ExperimentConfig, mesh: Mesh1D):
    """Tolerance, ``xi`` and schedule for a config, resolving "auto"."""
    delta_min = cfg.q0[1] if cfg.problem == "II" else math.inf
    eta = cfg.eta if cfg.eta is not None else default_eta(mesh, cfg.s_range[0], delta_min)
    xi = cfg.xi if cfg.xi is not None else optimize_xi(cfg.s_range, math.inf, eta, diam=mesh.diam)
    return build_schedule(cfg.s_range, math.inf, eta, xi, diam=mesh.diam)


def build_family(cfg: ExperimentConfig, mesh: Mesh1D | None = None, schedule=None):
    mesh = mesh or build_mesh(*DOMAIN, cfg.n_elem)
    schedule = schedule or resolve_schedule(cfg, mesh)
    return precompute(mesh, schedule, scaled=cfg.problem == "I", factor=cfg.kernel_factor)


def target_data(cfg: ExperimentConfig, family) -> np.ndarray:
    """Observation ``u_d``: interpolated exact solution (I) or a discrete solve (II)."""
    if cfg.problem == "I":
        u_d = interpolate(family.mesh, getoor_solution(1, cfg.s_star))
    else:
        q_star = ParamPoint(cfg.s_star, cfg.delta_star)
        u_d = solve_state(family, q_star, tol=cfg.solver_tol, method=cfg.solver).solution
    return add_noise(u_d, cfg.sigma, cfg.seed)


# --- identify -----------------------------------------------------------------

@dataclass
class IdentifyResult:
    run: object
    summary: dict
    seconds: float
    ok: bool


def run_identify(cfg: ExperimentConfig, family=None, write: bool = True) -> IdentifyResult:
    cfg = cfg.resolved()
    t0 = time.perf_counter()
    family = family or build_family(cfg)
    u_d = target_data(cfg, family)
    reg = Regularizer(cfg.alpha, cfg.beta)
    q0 = ParamPoint(*cfg.q0)
    run = bfgs_identify(family, q0, u_d, reg, grad_tol=cfg.grad_tol, max_iter=cfg.max_iter,
                        solver_tol=cfg.solver_tol, method=cfg.solver)
    seconds = time.perf_counter() - t0
    summary = {
        "h": family.mesh.h,
        "N": family.n_dofs,
        "s": run.final_q.s,
        "delta": run.final_q.delta,
        "iterations": run.n_iterations,
        "evaluations": run.n_functional_evals,
    }
    if write:
        extra = {"nodes": family.n_nodes, "resolved_eta": family.schedule.eta, "resolved_xi": family.schedule.xi,
                 "converged": run.converged, "message": run.message}
        rows = [(r.iteration, r.q.s, r.q.delta, r.cost, r.grad_norm, r.n_evals) for r in run.iterates]
        write_csv(cfg.output_path, ["iter", "s", "delta", "cost", "grad_norm", "n_evals"], rows, cfg, extra)
        write_csv(sibling(cfg.output_path, "summary"), list(summary), [list(summary.values())], cfg, extra)
        write_csv(sibling(cfg.output_path, "evals"), ["eval", "s", "delta", "cost"],
                  [(i, q.s, q.delta, j) for i, (q, j) in enumerate(run.evaluations)], cfg)
    return IdentifyResult(run, summary, seconds, run.converged)


# --- convergence --------------------------------------------------------------

@dataclass
class ConvergenceResult:
    rows: list
    rows_exact: list
    rate_Hs: float
    rate_L2: float
    rate_Hs_exact: float
    rate_L2_exact: float
    ok: bool


def _errors_problem_I(mesh, A, u, s):
    # energy error from a(u,u) = (f,u): |u - u_h|^2 = (1,u) - 2 F.u_h + u_h' A u_h
    F = np.full(mesh.n_dofs, mesh.h)
    e2 = getoor_energy(s) - 2.0 * F @ u + A.quad_form(u)
    return math.sqrt(max(e2, 0.0)), l2_error(mesh, u, getoor_solution(1, s))


def _prolong(coarse: Mesh1D, fine: Mesh1D, u):
    return p1_values(coarse, u, fine.interior_nodes)


def run_convergence(cfg: ExperimentConfig, levels=None, write: bool = True) -> ConvergenceResult:
    """Energy and L2 errors over a sequence of meshes, with and without interpolation."""
    cfg = cfg.resolved()
    levels = tuple(levels or cfg.levels)
    s = cfg.s_star
    q = ParamPoint(s, cfg.delta_star)
    scaled = cfg.problem == "I"
    kappa = kernel_factor(s, scaled, cfg.kernel_factor)
    ref = None
    if cfg.problem == "II":
        fine = build_mesh(*DOMAIN, n_elem_for_level(max(levels) + 2))
        A_ref = assembly.assemble_truncated_direct(fine, q, scale=kappa)
        ref = (fine, A_ref, solve_system(A_ref, np.full(fine.n_dofs, fine.h), cfg.solver_tol).solution)
    rows, rows_exact = [], []
    for lev in levels:
        mesh = build_mesh(*DOMAIN, n_elem_for_level(lev))
        if q.finite:
            A_ex = assembly.assemble_truncated_direct(mesh, q, scale=kappa)
        else:
            A_ex = assembly.assemble_infinite(mesh, s, scale=kappa)
        family = build_family(cfg, mesh)
        f_vec = family.rhs
        u_ex = solve_system(A_ex, f_vec, cfg.solver_tol, cfg.solver).solution
        u_in = solve_state(family, q, f_vec, cfg.solver_tol, cfg.solver).solution
        for u, bucket in ((u_in, rows), (u_ex, rows_exact)):
            if ref is None:
                eH, eL = _errors_problem_I(mesh, A_ex, u, s)
            else:
                fine, A_ref, u_ref = ref
                v = _prolong(mesh, fine, u) - u_ref
                eH = math.sqrt(max(A_ref.quad_form(v), 0.0))
                eL = math.sqrt(mass_matrix(fine).quad_form(v))
            bucket.append([mesh.h, mesh.n_dofs, eH, eL])
    for bucket in (rows, rows_exact):
        for i, r in enumerate(bucket):
            r.append(math.nan if i == 0 else math.log(r[2] / bucket[i - 1][2]) / math.log(r[0] / bucket[i - 1][0]))
    h = [r[0] for r in rows]
    res = ConvergenceResult(
        rows, rows_exact,
        fit_rate(h, [r[2] for r in rows]), fit_rate(h, [r[3] for r in rows]),
        fit_rate(h, [r[2] for r in rows_exact]), fit_rate(h, [r[3] for r in rows_exact]),
        ok=False,
    )
    res.ok = res.rate_Hs >= 0.45 and all(
        abs(a[2] - b[2]) <= 0.05 * b[2] for a, b in zip(rows, rows_exact))
    if write:
        header = ["h", "N", "error_Hs", "error_L2", "rate"]
        extra = {"rate_Hs": res.rate_Hs, "rate_L2": res.rate_L2}
        write_csv(cfg.output_path, header, rows, cfg, extra)
        write_csv(sibling(cfg.output_path, "exact"), header, rows_exact, cfg,
                  {"rate_Hs": res.rate_Hs_exact, "rate_L2": res.rate_L2_exact})
    return res


# --- interpolation study --------------------------------------------------------

@dataclass
class InterpStudyResult:
    rows: list
    node_rows: list
    m_bar: int
    node_r2: float
    ok: bool


def _r_squared(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    return float(np.corrcoef(x, y)[0, 1] ** 2)


def check_exponential_decay(errors, floor: float, factor: float = 3.0) -> bool:
    """Each added node divides the error by ``factor`` until it is below ``floor``."""
    errors = list(errors)
    if min(errors) > floor:
        return False
    for a, b in zip(errors, errors[1:]):
        if a <= floor:
            break
        if b > a / factor and b > floor:
            return False
    return True


def run_interp_study(cfg: ExperimentConfig, m_list=None, s_eval=None, etas=None,
                     write: bool = True) -> InterpStudyResult:
    """Solution and cost-derivative errors against the number of nodes per interval.

    The reference for the solution is the exact-operator solve; the
    reference for ``j'`` is a family with ``m_bar`` nodes per interval.
    The problem is I (scaled fractional Laplacian) with data from the
    exact solution at ``s_star``.
    """
    cfg = dataclasses.replace(cfg, problem="I").resolved()
    m_list = tuple(m_list or cfg.m_list)
    s_eval = tuple(s_eval or np.round(np.arange(0.1, 0.95, 0.1), 10))
    etas = tuple(etas or [10.0**-k for k in range(2, 9)])
    mesh = build_mesh(*DOMAIN, cfg.n_elem)
    xi = cfg.xi if cfg.xi is not None else 0.3
    m_bar = max(m_list) + 10
    u_d = interpolate(mesh, getoor_solution(1, cfg.s_star))
    reg = Regularizer(cfg.alpha)

    exact = {}
    for s in s_eval:
        A = assembly.assemble_infinite(mesh, s, scale=kernel_factor(s, True, cfg.kernel_factor))
        exact[s] = (A, solve_system(A, np.full(mesh.n_dofs, mesh.h), cfg.solver_tol).solution)

    def family_for(m):
        sch = fixed_order_schedule(cfg.s_range, xi, m)
        return precompute(mesh, sch, scaled=True, factor=cfg.kernel_factor)

    def jprime(fam):
        fun = ReducedFunctional(fam, u_d, reg, cfg.solver_tol, cfg.solver)
        return np.array([fun.gradient(ParamPoint(s))[0] for s in s_eval])

    ref_grad = jprime(family_for(m_bar))
    rows = []
    for m in m_list + ((m_bar,) if m_bar not in m_list else ()):
        fam = family_for(m)
        sol_err = 0.0
        for s in s_eval:
            A, u = exact[s]
            u_m = solve_state(fam, ParamPoint(s), tol=cfg.solver_tol, method=cfg.solver).solution
            rel = math.sqrt(max(A.quad_form(u_m - u), 0.0)) / math.sqrt(A.quad_form(u))
            sol_err = max(sol_err, rel)
        d_err = float(np.max(np.abs(jprime(fam) - ref_grad)))
        rows.append([m, sol_err, d_err])
    node_rows = []
    for eta in etas:
        sch = build_schedule(cfg.s_range, math.inf, eta, xi, diam=mesh.diam)
        node_rows.append([eta, xi, sch.total_nodes])
    r2 = _r_squared([abs(math.log(e)) for e in etas], [r[2] for r in node_rows])
    ok = check_exponential_decay([r[1] for r in rows if r[0] in m_list], FLOOR_TOL) and r2 >= 0.95
    if write:
        extra = {"m_bar": m_bar, "resolved_xi": xi, "node_r2": r2}
        write_csv(cfg.output_path, ["M", "solution_error", "deriv_error"], rows, cfg, extra)
        write_csv(sibling(cfg.output_path, "nodes"), ["eta", "xi", "nodes"], node_rows, cfg, extra)
    return InterpStudyResult(rows, node_rows, m_bar, r2, ok)


# --- benchmark ------------------------------------------------------------------

@dataclass
class BenchResult:
    rows: list
    ok: bool


def _best_time(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_bench(cfg: ExperimentConfig, levels=None, repeats: int = 3, write: bool = True) -> BenchResult:
    """Timings of node-matrix precompute and correction assembly per horizon."""
    cfg = cfg.resolved()
    levels = tuple(levels or cfg.levels)
    quad = QuadratureConfig()
    rows = []
    ok = True
    for lev in levels:
        mesh = build_mesh(*DOMAIN, n_elem_for_level(lev))
        sch = resolve_schedule(cfg, mesh)
        t_pre = _best_time(lambda: precompute(mesh, sch, quad, threads=1), 1)
        rows.append(["precompute", mesh.n_dofs, t_pre])
        rows.append(["precompute_per_node", mesh.n_dofs, t_pre / sch.total_nodes])
        times = {}
        for delta in (0.5, 1.5, 2.5):
            times[delta] = _best_time(
                lambda: assembly.assemble_correction(mesh, cfg.s_star, delta, quad), repeats)
            rows.append([f"correction_delta_{delta!r}", mesh.n_dofs, times[delta]])
        if mesh.n_elem >= 2**10 and not times[2.5] < 0.5 * times[0.5]:
            ok = False
    if write:
        write_csv(cfg.output_path, ["phase", "N", "seconds"], rows, cfg)
    return BenchResult(rows, ok)


# --- gradient check ---------------------------------------------------------------

@dataclass
class GradcheckResult:
    rows: list
    max_rel_err: float
    ok: bool


def run_gradcheck(cfg: ExperimentConfig, n_points: int = 10, tol: float = 1e-4,
                  step: float = 1e-5, write: bool = True) -> GradcheckResult:
    """Adjoint gradient against central differences at random points."""
    cfg = cfg.resolved()
    family = build_family(cfg)
    u_d = target_data(cfg, family)
    reg = Regularizer(cfg.alpha, cfg.beta)
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.s_range
    two_d = cfg.problem == "II"
    rows = []
    worst = 0.0
    for _ in range(n_points):
        s = rng.uniform(lo + 0.05, hi - 0.05)
        d = rng.uniform(0.3, 2.5) if two_d else math.inf
        q = ParamPoint(s, d)
        fun = ReducedFunctional(family, u_d, reg, cfg.solver_tol, cfg.solver)
        g = fun.gradient(q)
        x = np.array([s, d]) if two_d else np.array([s])
        fd = fd_gradient(lambda y: fun.value(ParamPoint(*y)), x, step)
        rel = float(np.linalg.norm(g - fd) / np.linalg.norm(fd))
        worst = max(worst, rel)
        rows.append([s, d, g[0], fd[0], g[1] if two_d else math.nan, fd[1] if two_d else math.nan, rel])
    if write:
        write_csv(cfg.output_path, ["s", "delta", "grad_s", "fd_s", "grad_delta", "fd_delta", "rel_err"],
                  rows, cfg, {"max_rel_err": worst})
    return GradcheckResult(rows, worst, worst <= tol)
