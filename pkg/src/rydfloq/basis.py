"""Sturmian basis for the 1D half-line Coulomb problem.

Basis functions on x > 0 with scale parameter alpha:

    phi_n(x) = N_n * (2x/alpha) * exp(-x/alpha) * L^(1)_{n-1}(2x/alpha),  n = 1..N_b

with N_n = 1/sqrt(n) fixed by the normalization <phi_n| 1/x |phi_n> = 1, so the
Coulomb matrix is the identity. All operator matrix elements are then banded:
overlap and kinetic tridiagonal, Coulomb diagonal, dipole pentadiagonal.

Every matrix element is evaluated by Gauss-Laguerre quadrature on y = 2x/alpha.
The integrands are polynomial * exp(-y) of degree <= 2*N_b + 1, so a rule with
N_b + 3 or more nodes is exact up to roundoff; closed forms are never hardcoded.
Laguerre values are computed with the weight exponential folded in
(exp(-y/2) * L) by a recurrence that renormalizes a per-node binary exponent,
so rules with several hundred nodes work even though both the bare polynomial
values and the raw Gauss-Laguerre weights leave double range there.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .banded import BandedMatrix
from .errors import ConvergenceError

# declared bandwidths of the operator matrices (number of sub/superdiagonals)
_BANDS = {"S": 1, "K": 1, "C": 0, "X": 2}

_DUMP_MAGIC = b"RYFL"
_DUMP_VERSION = 1


@dataclass(frozen=True)
class SturmianBasis:
    """Basis size and scale parameter."""

    size: int
    alpha: float

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"basis size must be >= 2, got {self.size}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class OperatorSet:
    """Banded matrices of the half-line problem in a fixed SturmianBasis.

    S = overlap, K = kinetic (1/2 integral phi' phi'), C = Coulomb <1/x> (identity
    by normalization), X = dipole <x>. All real symmetric before dilation.
    """

    basis: SturmianBasis
    S: BandedMatrix
    K: BandedMatrix
    C: BandedMatrix
    X: BandedMatrix


# Mantissas of the rescaled recurrences are kept below 2**512; the per-node
# exponent absorbs the rest. exp(-y/2) itself is split as frac * 2**(-shift)
# with frac in [0.5, 1], so emitted values only ever pass through np.ldexp.
_RESCALE_LIMIT = 2.0**512
_RESCALE_SHIFT = 512

# Quadrature internals run in extended precision where the platform has a real
# long double (x86 float80). Recurrence roundoff grows with polynomial order;
# in plain double it leaves ~3e-12 relative noise on the cancelling
# out-of-band sums at N_b ~ 500, just over the 1e-12 bandwidth bar.
_QUAD_DTYPE = np.longdouble if np.finfo(np.longdouble).eps < 1e-18 else np.float64
_HALF_LOG2E = 0.5 / np.log(_QUAD_DTYPE(2.0))


def _exp_half_split(y):
    """exp(-y/2) as (frac, shift) with frac * 2**(-shift), frac in [0.5, 1]."""
    q = y * _HALF_LOG2E
    shift = np.floor(q)
    return np.exp2(shift - q), shift.astype(np.int64)


def _rescale_pair(prev, cur, expo):
    big = np.maximum(np.abs(prev), np.abs(cur))
    mask = big > _RESCALE_LIMIT
    if mask.any():
        prev[mask] = np.ldexp(prev[mask], -_RESCALE_SHIFT)
        cur[mask] = np.ldexp(cur[mask], -_RESCALE_SHIFT)
        expo[mask] += _RESCALE_SHIFT


def _folded_laguerre_table(order_max, alpha_lag, y):
    """Rows k = 0..order_max of exp(-y/2) * L^(alpha)_k(y), columns over y.

    The three-term recurrence runs on mantissas with a per-node binary
    exponent; each row is emitted through exact ldexp scaling. Entries whose
    true magnitude is below floating-point range come out as zero, which is
    the correct rounding for the quadrature sums these tables feed. The dtype
    of y is kept throughout.
    """
    y = np.asarray(y)
    frac, shift = _exp_half_split(y)
    tab = np.zeros((order_max + 1, len(y)))
    tab[0] = np.ldexp(frac, -shift)
    if order_max == 0:
        return tab
    expo = np.zeros(len(y), dtype=np.int64)
    prev = np.ones_like(y)
    cur = 1.0 + alpha_lag - y
    tab[1] = np.ldexp(cur * frac, -shift)
    for k in range(1, order_max):
        prev, cur = cur, ((2 * k + alpha_lag + 1 - y) * cur - (k + alpha_lag) * prev) / (k + 1)
        _rescale_pair(prev, cur, expo)
        tab[k + 1] = np.ldexp(cur * frac, expo - shift)
    return tab


def _folded_laguerre_pair(order, y):
    """(exp(-y/2) L_order, exp(-y/2) L_{order-1}) for plain Laguerre (alpha = 0)."""
    y = np.asarray(y)
    frac, shift = _exp_half_split(y)
    if order == 0:
        return np.ldexp(frac, -shift), np.zeros_like(y)
    expo = np.zeros(len(y), dtype=np.int64)
    prev = np.ones_like(y)
    cur = 1.0 - y
    for k in range(1, order):
        prev, cur = cur, ((2 * k + 1 - y) * cur - k * prev) / (k + 1)
        _rescale_pair(prev, cur, expo)
    return np.ldexp(cur * frac, expo - shift), np.ldexp(prev * frac, expo - shift)


def gauss_laguerre_scaled(m, dtype=np.float64):
    """Gauss-Laguerre rule with the weight exponential folded into the weights.

    Returns nodes y_i and scaled weights what_i = w_i * exp(y_i): with the
    integrand also evaluated in folded form, sum_i what_i * [exp(-y_i) P(y_i)]
    equals integral_0^inf exp(-y) P(y) dy exactly for deg P <= 2m - 1. Nodes
    come from the Jacobi matrix and are Newton-polished on the folded
    polynomial in the requested dtype; the raw w_i would underflow for m
    beyond a few hundred.
    """
    y = scipy.linalg.eigvalsh_tridiagonal(2.0 * np.arange(m) + 1.0, np.arange(1.0, m))
    y = y.astype(dtype)
    # Derivative of the folded polynomial from y L_m'(y) = m (L_m - L_{m-1}).
    for _ in range(3):
        fm, fm1 = _folded_laguerre_pair(m, y)
        deriv = m * (fm - fm1) / y - 0.5 * fm
        y = y - fm / deriv
    fm1p, _ = _folded_laguerre_pair(m + 1, y)
    w_scaled = y / ((m + 1) ** 2 * fm1p**2)
    return y, w_scaled


def basis_function(basis: SturmianBasis, n, x):
    """Evaluate phi_n at x (scalar or array), x > 0.

    Uses the folded three-term Laguerre recurrence; safe for large n and x.
    """
    if not 1 <= n <= basis.size:
        raise ValueError(f"n must be in 1..{basis.size}, got {n}")
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("basis functions are defined on x > 0")
    scalar = x.ndim == 0
    y = 2.0 * np.atleast_1d(x) / basis.alpha
    lag = _folded_laguerre_table(n - 1, 1.0, y)[n - 1]
    val = y * lag / np.sqrt(n)
    return float(val[0]) if scalar else val


def _dense_operators(basis: SturmianBasis, extra_nodes):
    """Raw dense operator matrices from Gauss-Laguerre quadrature, as float64."""
    nb, alpha = basis.size, _QUAD_DTYPE(basis.alpha)
    m = nb + max(extra_nodes, 3)
    y, w = gauss_laguerre_scaled(m, dtype=_QUAD_DTYPE)

    norms = 1.0 / np.sqrt(np.arange(1, nb + 1, dtype=_QUAD_DTYPE))
    t1 = _folded_laguerre_table(nb - 1, 1.0, y)          # rows k = n-1
    # d/dy [exp(-y/2) L^(1)_k] = -exp(-y/2) L^(2)_{k-1} - (1/2) exp(-y/2) L^(1)_k
    t2 = np.zeros_like(t1)
    if nb >= 2:
        t2[1:] = _folded_laguerre_table(nb - 2, 2.0, y)

    f = norms[:, None] * y[None, :] * t1                          # phi_n(y)
    g = (2.0 / alpha) * norms[:, None] * (t1 + y[None, :] * (-t2 - 0.5 * t1))  # dphi_n/dx

    def gram(values, point_weight):
        dense = (values * point_weight[None, :]) @ values.T
        return np.triu(dense) + np.triu(dense, 1).T               # exactly symmetric

    dense = {
        "S": (alpha / 2.0) * gram(f, w),
        "K": (alpha / 4.0) * gram(g, w),
        "C": gram(f, w / y),
        "X": (alpha**2 / 4.0) * gram(f, w * y),
    }
    return {name: mat.astype(np.float64) for name, mat in dense.items()}


def band_defects(basis: SturmianBasis, extra_nodes: int = 6):
    """Worst out-of-band / max-element ratio of each raw operator matrix.

    Diagnostic for quadrature exactness: 'S', 'K', 'C', 'X' map to the largest
    magnitude found outside the declared band, relative to the largest element.
    """
    defects = {}
    for name, mat in _dense_operators(basis, extra_nodes).items():
        hb = _BANDS[name]
        outside = 0.0
        for q in range(hb + 1, basis.size):
            outside = max(outside, np.max(np.abs(np.diagonal(mat, q))))
        defects[name] = outside / np.max(np.abs(mat))
    return defects


def build_operators(basis: SturmianBasis, extra_nodes: int = 6) -> OperatorSet:
    """All operator matrices by exact Gauss-Laguerre quadrature.

    The kinetic matrix is computed after integration by parts as
    (1/2) integral phi_n'(x) phi_m'(x) dx, which keeps the integrand a plain
    polynomial * exp(-y). A bandwidth violation beyond roundoff means the
    quadrature rule was not exact and is reported as an internal error.
    """
    nb = basis.size
    banded = {}
    for name, mat in _dense_operators(basis, extra_nodes).items():
        hb = _BANDS[name]
        scale = np.max(np.abs(mat))
        outside = 0.0
        for q in range(hb + 1, nb):
            outside = max(outside, np.max(np.abs(np.diagonal(mat, q))))
        if outside > 1e-12 * scale:
            raise RuntimeError(
                f"quadrature rule not exact: operator {name} has out-of-band "
                f"element {outside:.3e} (relative {outside / scale:.3e})"
            )
        banded[name] = BandedMatrix.from_dense(mat, hb, hb)

    return OperatorSet(basis=basis, S=banded["S"], K=banded["K"], C=banded["C"], X=banded["X"])


def field_free_spectrum(ops: OperatorSet, count=None):
    """Eigenvalues and S-orthonormal eigenvectors of (K - C) v = E S v, ascending."""
    h = ops.K.to_dense() - ops.C.to_dense()
    s = ops.S.to_dense()
    energies, vectors = scipy.linalg.eigh(h, s)
    if count is not None:
        energies, vectors = energies[:count], vectors[:, :count]
    return energies, vectors


def field_free_state(ops: OperatorSet, n0: int):
    """Coefficient vector of the n0-th bound state, v^T S v = 1.

    Requires the basis built with alpha = n0 (the n0-th basis function is then
    the exact bound state) and size >= 4*n0.
    """
    basis = ops.basis
    if abs(basis.alpha - n0) > 1e-12 * max(1.0, n0):
        raise ValueError(f"field_free_state requires alpha = n0 (alpha={basis.alpha}, n0={n0})")
    if basis.size < 4 * n0:
        raise ValueError(f"basis size {basis.size} < 4*n0 = {4 * n0}")
    target = -0.5 / n0**2
    energies, vectors = field_free_spectrum(ops)
    idx = int(np.argmin(np.abs(energies - target)))
    if abs(energies[idx] - target) > 1e-6:
        raise ConvergenceError(
            f"nearest field-free eigenvalue {energies[idx]:.3e} not within 1e-6 of {target:.3e}",
            best_residual=float(abs(energies[idx] - target)),
        )
    v = vectors[:, idx]
    if v[int(np.argmax(np.abs(v)))] < 0:  # deterministic sign
        v = -v
    return v


def save_operators(ops: OperatorSet, path):
    """Binary dump: header (magic, version, N_b, alpha, bandwidths) + diagonals.

    All floats are IEEE-754 little-endian doubles; the format is versioned.
    """
    with open(path, "wb") as fh:
        fh.write(_DUMP_MAGIC)
        fh.write(struct.pack("<II", _DUMP_VERSION, ops.basis.size))
        fh.write(struct.pack("<d", ops.basis.alpha))
        for name in ("S", "K", "C", "X"):
            mat = getattr(ops, name)
            fh.write(struct.pack("<III", mat.dim, mat.kl, mat.ku))
            fh.write(np.ascontiguousarray(mat.data, dtype="<f8").tobytes())


def load_operators(path) -> OperatorSet:
    """Read back a save_operators dump."""
    with open(path, "rb") as fh:
        if fh.read(4) != _DUMP_MAGIC:
            raise ValueError(f"{path}: not an operator dump")
        version, size = struct.unpack("<II", fh.read(8))
        if version != _DUMP_VERSION:
            raise ValueError(f"{path}: unsupported dump version {version}")
        (alpha,) = struct.unpack("<d", fh.read(8))
        mats = {}
        for name in ("S", "K", "C", "X"):
            dim, kl, ku = struct.unpack("<III", fh.read(12))
            raw = fh.read(8 * (kl + ku + 1) * dim)
            data = np.frombuffer(raw, dtype="<f8").reshape(kl + ku + 1, dim).astype(np.float64)
            mats[name] = BandedMatrix(dim, kl, ku, data=data)
    return OperatorSet(basis=SturmianBasis(size=size, alpha=alpha), **mats)
