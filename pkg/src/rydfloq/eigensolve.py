"""Shift-invert eigensolver for the banded complex-symmetric pair (A, B).

Arnoldi iteration on the operator (A - sigma*B)^{-1} B with the ordinary
conjugating inner product; the bilinear c-product (no conjugation) is used
only for the physics: normalization vT B v = 1 and decomposition weights.
Residuals of returned pairs are verified against the original pencil, never
against Hessenberg estimates alone.

Two interchangeable inner solvers factorize A - sigma*B: a sparse LU on the
compressed structure (default; the Floquet matrix carries ~13 nonzeros per
row inside a much wider band) and a dense-band LU. Results agree to solver
tolerance; the banded path exists for cross-checking and as a fallback.
"""

from __future__ import annotations

import cmath
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .banded import BandedMatrix, banded_lu_factor
from .errors import ConvergenceError, SingularShiftError
from .floquet import FloquetProblem

# Positive imaginary parts up to this size are roundoff noise on a spectrum
# confined to the closed lower half-plane; larger ones mean the dilation or
# basis is inadequate and must not be silently repaired.
_IM_NOISE = 1e-10

_DENSE_LIMIT = 2000

# A Ritz value of the shift-inverted operator beyond this magnitude means the
# shift sits numerically on an eigenvalue: later Krylov directions then carry
# roundoff amplified by |nu| and the extraction degrades. Treated like a
# singular factorization: restart with a perturbed shift.
_NU_CAP = 1e12


@dataclass(frozen=True)
class EigenRequest:
    """Shift target and solver budget for one spectral window."""

    sigma: complex
    n_eigs: int
    tol: float = 1e-10
    max_iter: int = 300
    start_vector: np.ndarray | None = field(default=None, repr=False)
    inner_solver: str = "sparse"
    # "raise": a converged quasi-energy above the real axis beyond noise is an
    # error. "drop": such states (discretized rotated-continuum artifacts) are
    # skipped during extraction; the caller must audit completeness, e.g. via
    # the captured decomposition weight.
    upper_half: str = "raise"
    # Same choice for c-null eigenvectors (vT B v numerically zero, the mark
    # of a near-exceptional-point pair among photon images). Such a vector
    # cannot be c-normalized, so "drop" discards it instead of raising.
    c_null: str = "raise"

    def __post_init__(self):
        if self.n_eigs < 1:
            raise ValueError(f"n_eigs must be >= 1, got {self.n_eigs}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < self.n_eigs + 2:
            raise ValueError(f"max_iter {self.max_iter} too small for {self.n_eigs} eigenpairs")
        if self.inner_solver not in ("sparse", "banded"):
            raise ValueError(f"unknown inner solver {self.inner_solver!r}")
        if self.upper_half not in ("raise", "drop"):
            raise ValueError(f"unknown upper-half policy {self.upper_half!r}")
        if self.c_null not in ("raise", "drop"):
            raise ValueError(f"unknown c-null policy {self.c_null!r}")


@dataclass(frozen=True)
class EigenPair:
    """One quasi-energy with its c-normalized eigenvector."""

    epsilon: complex
    vector: np.ndarray
    residual: float
    degenerate: bool = False


def c_product(u, v, B: BandedMatrix) -> complex:
    """Bilinear product uT B v, no complex conjugation."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != (B.dim,) or v.shape != (B.dim,):
        raise ValueError(f"vector shapes {u.shape}, {v.shape} do not match matrix dimension {B.dim}")
    return complex(u @ (B @ v))


def _c_normalize(vector, B):
    bv = B @ vector
    norm2 = complex(vector @ bv)
    scale = np.linalg.norm(vector) * np.linalg.norm(bv)
    if abs(norm2) < 1e-12 * max(scale, 1e-300):
        raise ConvergenceError(f"eigenvector is c-null (vT B v = {norm2:.3e}); cannot normalize")
    v = vector / cmath.sqrt(norm2)
    lead = v[int(np.argmax(np.abs(v)))]
    if lead.real < 0 or (lead.real == 0 and lead.imag < 0):
        v = -v
    return v


def _clamp_imag(epsilon, noisy):
    if 0 < epsilon.imag <= _IM_NOISE:
        noisy.append(epsilon.imag)
        return complex(epsilon.real, 0.0)
    return epsilon


def _mark_degenerate(pairs):
    out = []
    for i, p in enumerate(pairs):
        close = any(abs(p.epsilon - q.epsilon) < 1e-12 for j, q in enumerate(pairs) if j != i)
        out.append(EigenPair(p.epsilon, p.vector, p.residual, degenerate=close) if close else p)
    return out


def _finalize(eps_list, vec_list, b_banded, a_csc, b_csc, sigma, positive_imag_fatal,
              drop_c_null=False):
    noisy = []
    pairs = []
    for eps, vec in zip(eps_list, vec_list):
        eps = _clamp_imag(eps, noisy)
        if eps.imag > _IM_NOISE and positive_imag_fatal:
            raise ConvergenceError(
                f"quasi-energy {eps:.6e} lies in the upper half-plane beyond noise; "
                "increase the dilation angle or the basis"
            )
        try:
            v = _c_normalize(vec, b_banded)
        except ConvergenceError:
            if drop_c_null:
                continue
            raise
        av = a_csc @ v
        residual = float(np.linalg.norm(av - eps * (b_csc @ v)) / np.linalg.norm(av))
        pairs.append(EigenPair(epsilon=eps, vector=v, residual=residual))
    if noisy:
        # fixed message so the default warning filter deduplicates across a scan
        warnings.warn("clamped positive imaginary quasi-energy noise to zero")
    pairs.sort(key=lambda p: (abs(p.epsilon - sigma), p.epsilon.real, p.epsilon.imag))
    return _mark_degenerate(pairs)


def dense_eigs(problem: FloquetProblem, sigma: complex | None = None):
    """Full spectrum by a dense generalized solver; dimensions <= 2000 only.

    Oracle companion to shift_invert_eigs and a convenience for tiny problems.
    Positive imaginary parts beyond noise are kept (not fatal) so the output
    can be inspected.
    """
    dim = problem.A.dim
    if dim > _DENSE_LIMIT:
        raise ValueError(f"dense solver limited to dimension {_DENSE_LIMIT}, got {dim}")
    a = problem.A.to_dense()
    b = problem.B.to_dense()
    eps, vecs = scipy.linalg.eig(a, b)
    keep = np.isfinite(eps)
    order = np.argsort(np.abs(eps[keep] - sigma) if sigma is not None else eps[keep].real)
    eps_list = [complex(e) for e in eps[keep][order]]
    vec_list = [vecs[:, i] for i in np.flatnonzero(keep)[order]]
    target = sigma if sigma is not None else 0.0
    return _finalize(eps_list, vec_list, problem.B, problem.A.to_csc(), problem.B.to_csc(),
                     target, positive_imag_fatal=False)


def _inner_solver(problem, sigma, kind, a_csc, b_csc):
    if kind == "banded":
        shifted = problem.A.subtract_scaled(problem.B, sigma)
        return banded_lu_factor(shifted).solve
    shifted = (a_csc - sigma * b_csc).tocsc()
    try:
        lu = scipy.sparse.linalg.splu(shifted)
    except RuntimeError as exc:
        if "singular" in str(exc).lower():
            raise SingularShiftError(f"shift {sigma} produced a singular factorization") from exc
        raise
    return lu.solve


def _start_vector(req, b_banded, dim):
    if req.start_vector is not None:
        v = np.asarray(req.start_vector, dtype=np.complex128)
        if v.shape != (dim,):
            raise ValueError(f"start_vector shape {v.shape} does not match dimension {dim}")
        if not np.linalg.norm(v) > 0:
            raise ValueError("start_vector is zero")
    else:
        v = np.ones(dim, dtype=np.complex128)
        v = v / cmath.sqrt(complex(v @ (b_banded @ v)))
    return v / np.linalg.norm(v)


def shift_invert_eigs(problem: FloquetProblem, req: EigenRequest):
    """Eigenpairs of A v = eps B v nearest the shift, residual-verified.

    Returns between 1 and req.n_eigs pairs ordered by distance from
    req.sigma, each satisfying ||A v - eps B v|| / ||A v|| <= req.tol.
    Singular shifts are retried with a small complex perturbation; running
    out of Krylov space before anything converges raises ConvergenceError
    with the best residual seen.
    """
    a_csc = problem.A.to_csc()
    b_csc = problem.B.to_csc()
    sigma = complex(req.sigma)
    for attempt in range(3):
        guard_nu = attempt < 2
        try:
            return _arnoldi(problem, req, sigma, a_csc, b_csc, guard_nu)
        except SingularShiftError:
            if attempt == 2:
                raise
            sigma = sigma + 1e-8 * (1 + 1j) * max(1.0, abs(sigma))
    raise AssertionError("unreachable")


def _arnoldi(problem, req, sigma, a_csc, b_csc, guard_nu):
    solve = _inner_solver(problem, sigma, req.inner_solver, a_csc, b_csc)
    dim = problem.A.dim
    m_max = min(req.max_iter, dim)

    basis = np.empty((m_max + 1, dim), dtype=np.complex128)
    hess = np.zeros((m_max + 1, m_max), dtype=np.complex128)
    basis[0] = _start_vector(req, problem.B, dim)

    best_residual = np.inf
    check_points = set(range(max(2 * req.n_eigs, 12), m_max, max(req.n_eigs, 8)))
    m_used = 0
    breakdown = False
    for j in range(m_max):
        w = solve(np.asarray(b_csc @ basis[j]))
        for _ in range(2):  # modified Gram-Schmidt, one reorthogonalization pass
            coeffs = basis[: j + 1].conj() @ w
            w = w - basis[: j + 1].T @ coeffs
            hess[: j + 1, j] += coeffs
        if guard_nu and j == 0 and abs(hess[0, 0]) > _NU_CAP:
            raise SingularShiftError(f"shift {sigma} sits on an eigenvalue (|nu| = {abs(hess[0, 0]):.1e})")
        h_next = np.linalg.norm(w)
        m_used = j + 1
        if h_next < 1e-14:
            breakdown = True  # Krylov space is exact
        else:
            hess[j + 1, j] = h_next
            basis[j + 1] = w / h_next
        final = breakdown or m_used == m_max
        if final or m_used in check_points:
            result = _try_extract(problem, req, sigma, a_csc, b_csc, basis, hess, m_used, final, guard_nu)
            if isinstance(result, float):
                best_residual = min(best_residual, result)
            else:
                return result
            if breakdown:
                break
    raise ConvergenceError(
        f"no eigenpair reached tol {req.tol:.1e} within Krylov dimension {m_used}",
        best_residual=None if np.isinf(best_residual) else best_residual,
    )


def _try_extract(problem, req, sigma, a_csc, b_csc, basis, hess, m, final, guard_nu):
    """Ritz extraction; returns finished pairs or the best residual so far."""
    nu, y = scipy.linalg.eig(hess[:m, :m])
    if guard_nu and np.max(np.abs(nu)) > _NU_CAP:
        raise SingularShiftError(f"shift {sigma} sits on an eigenvalue (|nu| = {np.max(np.abs(nu)):.1e})")
    usable = np.abs(nu) > 1e-14
    order = np.argsort(-np.abs(nu))
    order = [i for i in order if usable[i]]
    if not order:
        return np.inf

    subdiag = abs(hess[m, m - 1]) if m < hess.shape[0] else 0.0
    eps_list, vec_list, best = [], [], np.inf
    for i in order:
        if len(eps_list) == req.n_eigs:
            break
        eps = sigma + 1.0 / nu[i]
        vec = basis[:m].T @ y[:, i]
        av = a_csc @ vec
        residual = float(np.linalg.norm(av - eps * (b_csc @ vec)) / np.linalg.norm(av))
        best = min(best, residual)
        if residual <= req.tol:
            if req.upper_half == "drop" and eps.imag > _IM_NOISE:
                continue
            eps_list.append(complex(eps))
            vec_list.append(vec)
        elif subdiag * abs(y[-1, i]) / abs(nu[i]) > 100 * req.tol:
            # far from converged; Ritz values further from sigma are worse
            break
    if not eps_list:
        return best
    if len(eps_list) < req.n_eigs and not final:
        return best  # keep iterating for the remaining pairs
    pairs = _finalize(eps_list, vec_list, problem.B, a_csc, b_csc, sigma,
                      positive_imag_fatal=True, drop_c_null=req.c_null == "drop")
    if not pairs:
        if final:
            raise ConvergenceError(
                f"every converged eigenpair near shift {sigma:.6e} was a c-null artifact"
            )
        return best  # all drops; widen the Krylov space and look again
    return pairs
