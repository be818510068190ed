import math

import mpmath
import numpy as np
import pytest

from fracident.assembly import ParamPoint
from fracident.mesh_fem import build_mesh
from fracident.oracle import (
    OracleToleranceError,
    TestProblem,
    add_noise,
    brute_force_entry,
    fd_gradient,
    getoor_constant,
    getoor_energy,
    getoor_solution,
    kernel_scale,
    kernel_scale_ds,
    scaling_constant,
    scaling_constant_ds,
)


def test_scaling_constant_half():
    assert scaling_constant(1, 0.5) == pytest.approx(1 / math.pi, rel=1e-15)
    assert kernel_scale(0.5) == pytest.approx(0.5 / math.pi, rel=1e-15)


@pytest.mark.parametrize("s", [0.1, 0.37, 0.75, 0.95])
def test_scaling_constant_mpmath(s):
    mpmath.mp.dps = 30
    ref = 4**s * s * mpmath.gamma(s + 0.5) / (mpmath.sqrt(mpmath.pi) * mpmath.gamma(1 - s))
    assert scaling_constant(1, s) == pytest.approx(float(ref), rel=1e-13)
    dref = mpmath.diff(lambda t: 4**t * t * mpmath.gamma(t + 0.5) / (mpmath.sqrt(mpmath.pi) * mpmath.gamma(1 - t)), s)
    assert scaling_constant_ds(1, s) == pytest.approx(float(dref), rel=1e-12)
    assert kernel_scale_ds(s) == pytest.approx(0.5 * float(dref), rel=1e-12)


def test_getoor_half():
    assert getoor_constant(1, 0.5) == pytest.approx(1.0, rel=1e-15)
    u = getoor_solution(1, 0.5)
    np.testing.assert_allclose(u([0.0, 1.0, -2.0, 0.6]), [1.0, 0.0, 0.0, 0.8])
    with pytest.raises(NotImplementedError):
        getoor_solution(2, 0.5)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.8])
def test_getoor_energy_is_integral(s):
    u = getoor_solution(1, s)
    mpmath.mp.dps = 20
    ref = mpmath.quad(lambda x: float(u(float(x))), [-1, 0, 1])
    assert getoor_energy(s) == pytest.approx(float(ref), rel=1e-10)


def test_test_problem():
    p = TestProblem("II", 0.75, 0.9)
    assert not p.scaled and p.q_star == ParamPoint(0.75, 0.9)
    assert TestProblem("I", 0.5).scaled
    np.testing.assert_array_equal(TestProblem.f([1.0, 2.0]), [1.0, 1.0])
    with pytest.raises(ValueError):
        TestProblem("I", 0.5, 1.0)
    with pytest.raises(ValueError):
        TestProblem("II", 0.5)
    with pytest.raises(ValueError):
        TestProblem("III", 0.5)


def test_brute_force_closed_form():
    # s=1/2, h=1/2, infinite horizon: diagonal entry equals 8 log 2
    m = build_mesh(-1, 1, 4)
    assert brute_force_entry(m, 0, 0, ParamPoint(0.5)) == pytest.approx(8 * math.log(2), rel=1e-9)


def test_brute_force_symmetry():
    m = build_mesh(-1, 1, 4)
    q = ParamPoint(0.3, 0.6)
    assert brute_force_entry(m, 0, 2, q) == pytest.approx(brute_force_entry(m, 2, 0, q), rel=1e-10)


def test_brute_force_guards():
    with pytest.raises(ValueError):
        brute_force_entry(build_mesh(-1, 1, 64), 0, 0, ParamPoint(0.5))
    with pytest.raises(OracleToleranceError):
        brute_force_entry(build_mesh(-1, 1, 4), 0, 0, ParamPoint(0.5), tol=1e-30)


def test_noise_seeded_and_proportional():
    u = np.linspace(0, 1, 50)
    a = add_noise(u, 0.5, seed=7)
    b = add_noise(u, 0.25, seed=7)
    np.testing.assert_allclose(a - u, 2 * (b - u), rtol=1e-14)
    np.testing.assert_array_equal(add_noise(u, 0.0), u)
    assert np.std(add_noise(np.zeros(20000), 1.0, seed=1)) == pytest.approx(1.0, abs=0.02)
    with pytest.raises(ValueError):
        add_noise(u, -1.0)


def test_fd_gradient_quadratic():
    f = lambda x: 3 * x[0] ** 2 + x[0] * x[1] - 2 * x[1] ** 2
    g = fd_gradient(f, [0.4, 0.7], 1e-4)
    np.testing.assert_allclose(g, [3 * 0.8 + 0.7, 0.4 - 4 * 0.7], rtol=1e-9)


def test_fd_gradient_second_order():
    f = lambda x: math.exp(x[0])
    errs = [abs(fd_gradient(f, [0.3], h)[0] - math.exp(0.3)) for h in (1e-2, 5e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=1e-2)


def test_fd_gradient_halves_near_boundary():
    f = lambda x: x[0] ** 2
    assert fd_gradient(f, [0.7e-5], 1e-5)[0] == pytest.approx(1.4e-5, rel=1e-6)
    with pytest.raises(ValueError):
        fd_gradient(f, [0.2e-5], 1e-5)
