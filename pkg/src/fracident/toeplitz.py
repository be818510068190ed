"""Symmetric Toeplitz matrices stored by their first row.

On a uniform mesh with translation-invariant kernels every stiffness,
correction and mass matrix is symmetric Toeplitz, so a matrix of size
``N x N`` is determined by ``N`` numbers.
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft
from scipy import linalg


class SymmetricToeplitz:
    """Symmetric Toeplitz matrix ``T[i, j] = row[|i - j|]``.

    Instances are treated as immutable; the row array is made read-only.

    Parameters
    ----------
    row : array_like
        First row (equivalently first column).
    """

    __slots__ = ("_row", "_fft_cache")

    def __init__(self, row):
        r = np.array(row, dtype=float)
        if r.ndim != 1 or r.size == 0:
            raise ValueError("row must be a non-empty 1D array")
        r.setflags(write=False)
        self._row = r
        self._fft_cache = None

    @property
    def row(self) -> np.ndarray:
        return self._row

    @property
    def n(self) -> int:
        return self._row.size

    @property
    def shape(self):
        return (self.n, self.n)

    def __len__(self):
        return self.n

    def dense(self) -> np.ndarray:
        """Return the full matrix as a 2D array."""
        return linalg.toeplitz(self._row)

    def diagonal(self) -> np.ndarray:
        return np.full(self.n, self._row[0])

    def _circulant_fft(self):
        # embed in a circulant of length 2n (padded to a fast size)
        if self._fft_cache is None:
            n = self.n
            m = sfft.next_fast_len(2 * n - 1, real=True)
            c = np.zeros(m)
            c[:n] = self._row
            if n > 1:
                c[m - n + 1:] = self._row[:0:-1]
            self._fft_cache = (m, sfft.rfft(c))
        return self._fft_cache

    def matvec(self, x) -> np.ndarray:
        """Matrix-vector product.

        Uses a dense product for small sizes and circulant embedding
        with FFT otherwise.
        """
        x = np.asarray(x, dtype=float)
        n = self.n
        if x.shape[0] != n:
            raise ValueError(f"dimension mismatch: {x.shape[0]} != {n}")
        if n <= 256:
            return self.dense() @ x
        m, cf = self._circulant_fft()
        if x.ndim == 1:
            return sfft.irfft(cf * sfft.rfft(x, m), m)[:n]
        return sfft.irfft(cf[:, None] * sfft.rfft(x, m, axis=0), m, axis=0)[:n]

    def matvec_exact(self, x) -> np.ndarray:
        """Matrix-vector product accumulated in extended precision.

        Used for residual checks where an FFT product would limit the
        attainable relative residual.
        """
        x = np.asarray(x, dtype=float)
        n = self.n
        if x.shape != (n,):
            raise ValueError("x must be a vector of matching length")
        k = np.concatenate([self._row[:0:-1], self._row]).astype(np.longdouble)
        y = np.convolve(k, x.astype(np.longdouble))[n - 1:2 * n - 1]
        return y

    def quad_form(self, u, v=None) -> float:
        """Return ``u^T T v`` (``v`` defaults to ``u``)."""
        u = np.asarray(u, dtype=float)
        w = u if v is None else np.asarray(v, dtype=float)
        return float(u @ self.matvec(w))

    def __matmul__(self, x):
        return self.matvec(x)

    def __add__(self, other):
        if isinstance(other, SymmetricToeplitz):
            return SymmetricToeplitz(self._row + other._row)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SymmetricToeplitz):
            return SymmetricToeplitz(self._row - other._row)
        return NotImplemented

    def __mul__(self, c):
        if np.isscalar(c):
            return SymmetricToeplitz(float(c) * self._row)
        return NotImplemented

    __rmul__ = __mul__

    def __repr__(self):
        return f"SymmetricToeplitz(n={self.n}, row[:3]={self._row[:3]!r})"


def inverse_first_column(row) -> np.ndarray:
    """First column of the inverse of an SPD symmetric Toeplitz matrix.

    Uses the Durbin recursion, which also certifies positive
    definiteness: every prediction error must stay positive.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the matrix is not positive definite.
    """
    row = np.asarray(row, dtype=float)
    n = row.size
    if not row[0] > 0.0:
        raise np.linalg.LinAlgError("Toeplitz matrix is not positive definite")
    r = row / row[0]
    y = np.empty(n - 1)
    beta = 1.0
    for k in range(n - 1):
        # y[:k] solves the order-k Yule-Walker system T_k y = -r[1:k+1]
        alpha = -(r[k + 1] + r[k:0:-1] @ y[:k]) / beta if k else -r[1]
        if not abs(alpha) < 1.0:
            raise np.linalg.LinAlgError("Toeplitz matrix is not positive definite")
        y[:k] += alpha * y[k - 1::-1] if k else 0.0
        y[k] = alpha
        beta *= 1.0 - alpha * alpha
    x = np.concatenate([[1.0], y]) / (row[0] * beta)
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("Toeplitz matrix is not positive definite")
    return x


class ToeplitzInverse:
    """Fast solver for a symmetric positive definite Toeplitz system.

    The first column of the inverse is obtained with the Levinson
    recursion; the inverse is then applied through the
    Gohberg-Semencul formula using FFT-based triangular Toeplitz
    products, at ``O(N log N)`` per solve.
    """

    def __init__(self, T: SymmetricToeplitz):
        n = T.n
        x = inverse_first_column(T.row)
        self.n = n
        self._x0 = x[0]
        y = x[::-1]
        zy = np.concatenate([[0.0], y[:-1]])
        m = sfft.next_fast_len(2 * n, real=True)
        self._m = m
        # lower triangular Toeplitz L(c): product with v is conv(c, v)[:n]
        self._fx = sfft.rfft(x, m)
        self._fzy = sfft.rfft(zy, m)

    def _lower(self, fc, v):
        return sfft.irfft(fc * sfft.rfft(v, self._m), self._m)[: self.n]

    def _upper(self, fc, v):
        # L(c)^T v = reverse(L(c) reverse(v))
        return self._lower(fc, v[::-1])[::-1]

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        t1 = self._lower(self._fx, self._upper(self._fx, b))
        t2 = self._lower(self._fzy, self._upper(self._fzy, b))
        return (t1 - t2) / self._x0
