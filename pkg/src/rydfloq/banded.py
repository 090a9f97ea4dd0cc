"""Banded matrix storage and LU factorization.

BandedMatrix is the universal operator container: overlap, kinetic, Coulomb and
dipole matrices in the Sturmian basis are narrow real bands; the assembled
Floquet matrix is a wide complex band (half-bandwidth N_b + 2) that is mostly
zero inside the band, which is why a sparse view is also provided.

Storage follows the LAPACK/scipy band convention:

    data[ku + i - j, j] = M[i, j]   for -kl <= j - i <= ku

so data has shape (kl + ku + 1, dim) and row ku holds the main diagonal.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack

from .errors import SingularShiftError


class BandedMatrix:
    """Square banded matrix stored by diagonals.

    Parameters
    ----------
    dim : int
        Matrix dimension.
    kl, ku : int
        Lower and upper bandwidths (number of sub/superdiagonals).
    data : ndarray, optional
        Band storage of shape (kl + ku + 1, dim); zeros if omitted.
    dtype : dtype, optional
        Used only when data is omitted.
    """

    def __init__(self, dim, kl, ku, data=None, dtype=np.float64):
        if dim < 1 or kl < 0 or ku < 0:
            raise ValueError(f"invalid band shape dim={dim} kl={kl} ku={ku}")
        if data is None:
            data = np.zeros((kl + ku + 1, dim), dtype=dtype)
        else:
            data = np.asarray(data)
            if data.shape != (kl + ku + 1, dim):
                raise ValueError(f"band data shape {data.shape} != {(kl + ku + 1, dim)}")
        self.dim = dim
        self.kl = kl
        self.ku = ku
        self.data = data

    @property
    def dtype(self):
        return self.data.dtype

    @classmethod
    def from_dense(cls, m, kl, ku):
        m = np.asarray(m)
        dim = m.shape[0]
        if m.shape != (dim, dim):
            raise ValueError("from_dense needs a square matrix")
        out = cls(dim, kl, ku, dtype=m.dtype)
        for q in range(-kl, ku + 1):
            d = np.diagonal(m, q)
            if q >= 0:
                out.data[ku - q, q:q + len(d)] = d
            else:
                out.data[ku - q, :len(d)] = d
        return out

    def el(self, i, j):
        """Single element M[i, j] (zero outside the band)."""
        q = j - i
        if q < -self.kl or q > self.ku:
            return self.data.dtype.type(0)
        return self.data[self.ku + i - j, j]

    def diagonal(self, q=0):
        """The q-th diagonal as a contiguous vector (column-indexed slice)."""
        if q < -self.kl or q > self.ku:
            raise ValueError(f"diagonal {q} outside band")
        if q >= 0:
            return self.data[self.ku - q, q:]
        # bands wider than the matrix hold empty diagonals beyond -(dim-1)
        return self.data[self.ku - q, :max(0, self.dim + q)]

    def to_dense(self):
        m = np.zeros((self.dim, self.dim), dtype=self.data.dtype)
        for q in range(-self.kl, self.ku + 1):
            d = self.diagonal(q)
            idx = np.arange(len(d))
            if q >= 0:
                m[idx, idx + q] = d
            else:
                m[idx - q, idx] = d
        return m

    def to_csc(self):
        """Sparse view keeping only diagonals with any nonzero entry."""
        offsets, diags = [], []
        for q in range(-self.kl, self.ku + 1):
            d = self.diagonal(q)
            if np.any(d != 0):
                offsets.append(q)
                diags.append(d)
        if not offsets:
            return sp.csc_matrix((self.dim, self.dim), dtype=self.data.dtype)
        return sp.diags(diags, offsets, shape=(self.dim, self.dim), format="csc")

    def matvec(self, x):
        x = np.asarray(x)
        y = np.zeros(self.dim, dtype=np.result_type(self.data.dtype, x.dtype))
        n = self.dim
        for q in range(max(-self.kl, 1 - n), min(self.ku, n - 1) + 1):
            row = self.data[self.ku - q]
            if q >= 0:
                y[:n - q] += row[q:] * x[q:]
            else:
                y[-q:] += row[:n + q] * x[:n + q]
        return y

    def __matmul__(self, x):
        return self.matvec(x)

    def subtract_scaled(self, other, c):
        """self - c*other as a new BandedMatrix with self's bandwidths."""
        if other.dim != self.dim or other.kl > self.kl or other.ku > self.ku:
            raise ValueError("operand band does not fit")
        out_dtype = np.result_type(self.data.dtype, other.data.dtype, type(c))
        out = BandedMatrix(self.dim, self.kl, self.ku, data=self.data.astype(out_dtype, copy=True))
        shift = self.ku - other.ku
        out.data[shift:shift + other.data.shape[0], :] -= c * other.data
        return out

    def max_abs_outside(self, kl, ku):
        """Largest |element| on diagonals outside the (kl, ku) band."""
        worst = 0.0
        for q in range(-self.kl, self.ku + 1):
            if -kl <= q <= ku:
                continue
            d = self.diagonal(q)
            if len(d):
                worst = max(worst, float(np.max(np.abs(d))))
        return worst

    def symmetry_defect(self):
        """max |M - M^T| over the band (0 for complex-symmetric matrices)."""
        worst = 0.0
        for q in range(1, max(self.kl, self.ku) + 1):
            if q >= self.dim:
                break
            upper = self.diagonal(q) if q <= self.ku else np.zeros(self.dim - q, dtype=self.dtype)
            lower = self.diagonal(-q) if q <= self.kl else np.zeros(self.dim - q, dtype=self.dtype)
            worst = max(worst, float(np.max(np.abs(upper - lower))))
        return worst


class BandedLU:
    """LU factorization of a banded matrix (LAPACK gbtrf, partial pivoting)."""

    def __init__(self, lu, ipiv, kl, ku, dim):
        self._lu = lu
        self._ipiv = ipiv
        self.kl = kl
        self.ku = ku
        self.dim = dim

    def solve(self, b):
        b = np.asarray(b, dtype=np.complex128)
        x, info = lapack.zgbtrs(self._lu, self.kl, self.ku, b, self._ipiv)
        if info != 0:
            raise RuntimeError(f"zgbtrs failed with info={info}")
        return x


def banded_lu_factor(m: BandedMatrix) -> BandedLU:
    """Factor a banded matrix with partial pivoting (LAPACK zgbtrf).

    Raises SingularShiftError on an exactly singular pivot, which for the
    shift-invert use (m = A - sigma*B) means the caller should perturb sigma.
    """
    kl, ku, n = m.kl, m.ku, m.dim
    # gbtrf wants kl extra rows on top for the pivoting fill-in
    ab = np.zeros((2 * kl + ku + 1, n), dtype=np.complex128, order="F")
    ab[kl:, :] = m.data
    lu, ipiv, info = lapack.zgbtrf(ab, kl, ku)
    if info < 0:
        raise ValueError(f"zgbtrf illegal argument {-info}")
    if info > 0:
        raise SingularShiftError(f"exactly singular pivot at position {info}")
    return BandedLU(lu, ipiv, kl, ku, n)
