"""Assembly of the complex-dilated Floquet eigenproblem.

The driven Hamiltonian p²/2 - 1/x + F·x·cos(ωt) in a Floquet ansatz couples
photon blocks k through the dipole; after dilation x -> x·e^{iθ} the blocks
are built from the real Sturmian operator prototypes scaled by unit-modulus
complex factors:

    diagonal block k:   H_k = e^{-2iθ}·K - e^{-iθ}·C - k·ω·S
    blocks (k, k±1):    (F/2)·e^{iθ}·X
    overlap block:      S

Everything stays banded: the assembled matrix pair (A, B) is complex symmetric
with total bandwidth N_b + 2 on each side of the diagonal.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .banded import BandedMatrix
from .basis import OperatorSet


@dataclass(frozen=True)
class FloquetConfig:
    """Dilation angle, photon-block window, and drive parameters (a.u.)."""

    theta: float
    k_min: int
    k_max: int
    F: float
    omega: float

    def __post_init__(self):
        if not 0.0 <= self.theta < math.pi / 2:
            raise ValueError(f"theta must lie in [0, pi/2), got {self.theta}")
        if not self.k_min <= 0 <= self.k_max:
            raise ValueError(f"block window must satisfy k_min <= 0 <= k_max, got [{self.k_min}, {self.k_max}]")
        if self.F < 0:
            raise ValueError(f"field must be nonnegative, got {self.F}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")

    @property
    def n_blocks(self) -> int:
        return self.k_max - self.k_min + 1


@dataclass(frozen=True)
class FloquetProblem:
    """Assembled generalized eigenproblem A v = ε B v.

    A is block tridiagonal in the photon index with the dilated atomic blocks
    on the diagonal; B is block diagonal with identical overlap blocks. Both
    are complex symmetric (equal to their plain transpose).
    """

    A: BandedMatrix
    B: BandedMatrix
    block_dim: int
    n_blocks: int
    config: FloquetConfig

    def block_index(self, k: int) -> int:
        """Position of photon block k within the stacked vector."""
        if not self.config.k_min <= k <= self.config.k_max:
            raise ValueError(f"photon block {k} outside window [{self.config.k_min}, {self.config.k_max}]")
        return k - self.config.k_min


def _add_diagonals(data, ku, offset, small: BandedMatrix, factor):
    # accumulate factor * small as a diagonal block starting at `offset`
    for q in range(-small.kl, small.ku + 1):
        vals = small.diagonal(q)
        col = offset + max(q, 0)
        data[ku - q, col: col + len(vals)] += factor * vals


def _add_cross(data, ku, offset, nb, small: BandedMatrix, factor):
    # accumulate factor * small at block (k, k+1) and its transpose at (k+1, k);
    # `small` is symmetric, so both use the same diagonal values
    for q in range(-small.kl, small.ku + 1):
        vals = small.diagonal(q)
        col = offset + nb + max(q, 0)
        data[ku - nb - q, col: col + len(vals)] += factor * vals
        col = offset + max(q, 0)
        data[ku + nb - q, col: col + len(vals)] += factor * vals


def assemble(ops: OperatorSet, cfg: FloquetConfig) -> FloquetProblem:
    """Build the dilated Floquet matrix pair from the atomic operator set."""
    nb = ops.basis.size
    n_blocks = cfg.n_blocks
    dim = nb * n_blocks
    ku = nb + 2

    kinetic_rot = cmath.exp(-2j * cfg.theta)
    coulomb_rot = cmath.exp(-1j * cfg.theta)
    dipole_rot = cmath.exp(1j * cfg.theta)

    data = np.zeros((2 * ku + 1, dim), dtype=np.complex128)
    for block, k in enumerate(range(cfg.k_min, cfg.k_max + 1)):
        offset = block * nb
        _add_diagonals(data, ku, offset, ops.K, kinetic_rot)
        _add_diagonals(data, ku, offset, ops.C, -coulomb_rot)
        _add_diagonals(data, ku, offset, ops.S, -k * cfg.omega)
        if k < cfg.k_max:
            _add_cross(data, ku, offset, nb, ops.X, 0.5 * cfg.F * dipole_rot)
    a = BandedMatrix(dim, ku, ku, data=data)

    b_data = np.zeros((3, dim), dtype=np.complex128)
    for block in range(n_blocks):
        _add_diagonals(b_data, 1, block * nb, ops.S, 1.0)
    b = BandedMatrix(dim, 1, 1, data=b_data)

    return FloquetProblem(A=a, B=b, block_dim=nb, n_blocks=n_blocks, config=cfg)


def embed_initial(problem: FloquetProblem, coeffs) -> np.ndarray:
    """Stack a one-block coefficient vector into photon block k = 0."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape != (problem.block_dim,):
        raise ValueError(f"expected coefficient vector of length {problem.block_dim}, got shape {coeffs.shape}")
    full = np.zeros(problem.block_dim * problem.n_blocks, dtype=np.complex128)
    start = problem.block_index(0) * problem.block_dim
    full[start: start + problem.block_dim] = coeffs
    return full


def block_count_heuristic(n0: int, omega0: float, F0: float, n_eff: float = math.inf,
                          margin: int = 4, cap: int = 64):
    """Photon-block window (k_min, k_max) for a scan point.

    Upward blocks cover the larger of the photon number to the effective
    threshold n_eff and to the true continuum, plus a fixed margin and a
    field-coupling allowance F·<x>/ω (the ladder the dipole coupling can
    climb regardless of ionization). Downward blocks carry no ionization
    channel and get only the margin and the coupling allowance. Both ends
    are clamped to ±cap.
    """
    if n0 < 1 or omega0 <= 0 or F0 < 0 or not n_eff > 0:
        raise ValueError(f"invalid scan point: n0={n0}, omega0={omega0}, F0={F0}, n_eff={n_eff}")
    omega = omega0 / n0**3
    binding = 0.5 / n0**2
    threshold = 0.0 if math.isinf(n_eff) else 0.5 / n_eff**2
    photons_eff = max(0, math.ceil((binding - threshold) / omega))
    photons_true = math.ceil(binding / omega)
    coupling = math.ceil(1.5 * F0 * n0 / omega0 - 1e-9)  # negligible couplings add nothing
    k_max = min(cap, max(photons_eff, photons_true) + margin + coupling)
    k_min = -min(cap, margin + coupling)
    return k_min, k_max
