import numpy as np
import pytest

from fracident.toeplitz import SymmetricToeplitz, ToeplitzInverse


def _spd_row(n, s=0.4):
    # decaying kernel with dominant diagonal
    d = np.arange(n, dtype=float)
    row = -1.0 / (1.0 + d) ** (1 + 2 * s)
    row[0] = 2.0 * np.abs(row[1:]).sum() + 1.0
    return row


@pytest.mark.parametrize("n", [1, 5, 300, 1001])
def test_matvec_matches_dense(n, rng):
    T = SymmetricToeplitz(_spd_row(n))
    x = rng.standard_normal(n)
    np.testing.assert_allclose(T.matvec(x), T.dense() @ x, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(np.asarray(T.matvec_exact(x), float), T.dense() @ x, rtol=1e-12, atol=1e-12)


def test_matvec_block(rng):
    T = SymmetricToeplitz(_spd_row(400))
    X = rng.standard_normal((400, 3))
    np.testing.assert_allclose(T.matvec(X), T.dense() @ X, rtol=1e-12, atol=1e-11)


@pytest.mark.parametrize("n", [2, 17, 600])
def test_inverse(n, rng):
    T = SymmetricToeplitz(_spd_row(n))
    b = rng.standard_normal(n)
    x = ToeplitzInverse(T).solve(b)
    np.testing.assert_allclose(T.dense() @ x, b, rtol=1e-10, atol=1e-10)


def test_inverse_rejects_indefinite():
    with pytest.raises(np.linalg.LinAlgError):
        ToeplitzInverse(SymmetricToeplitz([-1.0, 0.1, 0.0]))


def test_arithmetic_and_immutability():
    A = SymmetricToeplitz([2.0, -1.0, 0.0])
    B = SymmetricToeplitz([1.0, 0.5, 0.25])
    np.testing.assert_array_equal((A + B).row, [3.0, -0.5, 0.25])
    np.testing.assert_array_equal((A - B).row, [1.0, -1.5, -0.25])
    np.testing.assert_array_equal((2 * A).row, [4.0, -2.0, 0.0])
    with pytest.raises(ValueError):
        A.row[0] = 5.0
