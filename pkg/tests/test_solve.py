import math

import numpy as np
import pytest

from fracident import solve as solve_mod
from fracident.assembly import ParamPoint, assemble_infinite
from fracident.cheb import build_schedule
from fracident.mesh_fem import build_mesh, load_vector
from fracident.opfamily import precompute
from fracident.oracle import getoor_energy
from fracident.solve import (
    Factorization,
    NotPositiveDefiniteError,
    SolverError,
    cg_solve,
    precision_floor,
    solve_adjoint,
    solve_state,
    solve_system,
)
from fracident.toeplitz import SymmetricToeplitz


@pytest.fixture(scope="module")
def fam512():
    mesh = build_mesh(-1, 1, 512)
    sch = build_schedule((0.3, 0.7), math.inf, 1e-8, 0.3)
    return precompute(mesh, sch, scaled=True, factor=0.5)


def test_zero_rhs(family64):
    rep = solve_state(family64, ParamPoint(0.5, 1.0), f_vec=np.zeros(family64.n_dofs))
    assert rep.residual_norm == 0.0
    np.testing.assert_array_equal(rep.solution, 0.0)


def test_getoor_peak(fam512):
    u = solve_state(fam512, ParamPoint(0.5)).solution
    mid = fam512.n_dofs // 2
    assert fam512.mesh.interior_nodes[mid] == 0.0
    assert u[mid] == pytest.approx(1.0, abs=2e-2)


def test_galerkin_energy(fam512):
    # a(u - u_h, u - u_h) = a(u, u) - a(u_h, u_h) for the Galerkin solution
    s = 0.5
    u = solve_state(fam512, ParamPoint(s)).solution
    eh = fam512.evaluate(ParamPoint(s)).quad_form(u)
    assert eh <= getoor_energy(s)
    assert getoor_energy(s) - eh <= 0.05 * getoor_energy(s)


@pytest.mark.parametrize("method", ["direct", "cholesky", "cg"])
def test_methods_agree(family64, method):
    q = ParamPoint(0.65, 0.8)
    ref = solve_state(family64, q, method="cholesky").solution
    rep = solve_state(family64, q, method=method)
    assert rep.residual_norm <= max(1e-10, rep.floor)
    assert np.linalg.norm(rep.solution - ref) <= 1e-8 * np.linalg.norm(ref)


def test_large_toeplitz_path():
    mesh = build_mesh(-1, 1, 2048)
    A = assemble_infinite(mesh, 0.75, scale=0.5)
    b = load_vector(mesh, np.ones_like)
    rep = solve_system(A, b, 1e-10, "direct")
    assert rep.residual_norm <= max(1e-10, rep.floor)
    cg = solve_system(A, b, 1e-10, "cg")
    assert np.linalg.norm(cg.solution - rep.solution) <= 1e-8 * np.linalg.norm(rep.solution)


def test_factorization_reused_by_adjoint(family64, rng):
    q = ParamPoint(0.45, 1.3)
    before = solve_mod.stats["factorizations"]
    st = solve_state(family64, q)
    solve_adjoint(family64, q, st.solution, rng.standard_normal(family64.n_dofs), factor=st.factor)
    assert solve_mod.stats["factorizations"] - before == 1


def test_adjoint_zero_when_data_matches(family64):
    q = ParamPoint(0.45, 1.3)
    u = solve_state(family64, q).solution
    z = solve_adjoint(family64, q, u, u).solution
    np.testing.assert_array_equal(z, 0.0)


def test_adjoint_symmetry(family64, rng):
    q = ParamPoint(0.7, 0.6)
    A = family64.evaluate(q)
    d = rng.standard_normal(family64.n_dofs)
    z = solve_adjoint(family64, q, d, np.zeros_like(d)).solution
    np.testing.assert_allclose(A.matvec(z), family64.mass.matvec(d), rtol=0, atol=1e-10 * np.abs(d).max())


def test_not_positive_definite():
    T = SymmetricToeplitz(np.array([1.0, 2.0, 0.0, 0.0]))
    with pytest.raises(NotPositiveDefiniteError):
        Factorization(T)
    with pytest.raises(NotPositiveDefiniteError):
        cg_solve(SymmetricToeplitz(np.array([-1.0, 0.0])), np.ones(2))
    big = SymmetricToeplitz(np.concatenate([[1.0, 2.0], np.zeros(998)]))
    with pytest.raises(NotPositiveDefiniteError):
        Factorization(big).solve(np.ones(1000))


def test_unknown_method(family64):
    with pytest.raises(ValueError):
        solve_system(family64.evaluate(ParamPoint(0.5)), family64.rhs, method="lu")


def test_cg_iteration_cap():
    mesh = build_mesh(-1, 1, 256)
    A = assemble_infinite(mesh, 0.9)
    with pytest.raises(SolverError):
        cg_solve(A, np.ones(mesh.n_dofs), 1e-14, max_iter=3)


def test_precision_floor_small_for_identity():
    T = SymmetricToeplitz(np.array([1.0, 0.0, 0.0]))
    x = np.ones(3)
    assert precision_floor(T, x, np.linalg.norm(x)) == pytest.approx(8 * np.finfo(float).eps)


@pytest.mark.parametrize("q", [(0.5, math.inf), (0.75, 0.9), (0.2, 2.5)])
def test_energy_equals_load(family64, q):
    # ||u_h||_A^2 = f . u_h
    q = ParamPoint(*q)
    u = solve_state(family64, q).solution
    assert family64.evaluate(q).quad_form(u) == pytest.approx(family64.rhs @ u, rel=1e-10)
