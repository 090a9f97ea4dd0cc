import functools
import itertools

import numpy as np
import pytest

from rydfloq.banded import BandedMatrix, banded_lu_factor
from rydfloq.basis import SturmianBasis, build_operators, field_free_state
from rydfloq.eigensolve import (
    EigenRequest,
    c_product,
    dense_eigs,
    shift_invert_eigs,
)
from rydfloq.errors import ConvergenceError, SingularShiftError
from rydfloq.floquet import FloquetConfig, assemble


def toy_problem(values=(1.0, 2.0, 3.0)):
    n = len(values)
    a = BandedMatrix.from_dense(np.diag(np.asarray(values, dtype=complex)), 0, 0)
    b = BandedMatrix.from_dense(np.eye(n, dtype=complex), 0, 0)
    cfg = FloquetConfig(theta=0.0, k_min=0, k_max=0, F=0.0, omega=1.0)

    class Prob:
        pass

    p = Prob()
    p.A, p.B, p.block_dim, p.n_blocks, p.config = a, b, n, 1, cfg
    return p


@functools.lru_cache(maxsize=None)
def driven_problem():
    ops = build_operators(SturmianBasis(60, 5.0))
    cfg = FloquetConfig(theta=0.15, k_min=-3, k_max=3, F=2e-4, omega=0.003)
    return assemble(ops, cfg)


@functools.lru_cache(maxsize=None)
def driven_dense_pairs():
    return dense_eigs(driven_problem(), sigma=-0.02 + 0j)


def test_request_validation():
    EigenRequest(sigma=0j, n_eigs=3)
    for bad in (
        dict(sigma=0j, n_eigs=0),
        dict(sigma=0j, n_eigs=3, tol=0.0),
        dict(sigma=0j, n_eigs=3, max_iter=4),
        dict(sigma=0j, n_eigs=3, inner_solver="magic"),
        dict(sigma=0j, n_eigs=3, upper_half="clamp"),
        dict(sigma=0j, n_eigs=3, c_null="zap"),
    ):
        with pytest.raises(ValueError):
            EigenRequest(**bad)


def test_upper_half_state_raises_by_default_and_drops_on_request():
    # eigenvalue 1 + 1e-5j models a discretization artifact above the real axis
    prob = toy_problem((1.0 + 1e-5j, 2.0, 3.0))
    with pytest.raises(ConvergenceError):
        shift_invert_eigs(prob, EigenRequest(sigma=1.01 + 0j, n_eigs=1))
    pairs = shift_invert_eigs(
        prob, EigenRequest(sigma=1.01 + 0j, n_eigs=1, upper_half="drop")
    )
    assert pairs[0].epsilon == pytest.approx(2.0, abs=1e-10)


def test_c_product_is_bilinear_not_hermitian():
    b = BandedMatrix.from_dense(np.eye(2, dtype=complex), 0, 0)
    u = np.array([1j, 0.0])
    assert c_product(u, u, b) == pytest.approx(-1.0)  # no conjugation
    v = np.array([3.0, -2.0])
    assert c_product(v, v, b) == pytest.approx(13.0)  # real vectors: plain dot
    with pytest.raises(ValueError):
        c_product(u, np.ones(3), b)


def test_diagonal_toy_matches_nearest_eigenvalue():
    pairs = shift_invert_eigs(toy_problem(), EigenRequest(sigma=2.1 + 0j, n_eigs=1))
    assert pairs[0].epsilon == pytest.approx(2.0, abs=1e-12)
    assert pairs[0].residual < 1e-12
    assert c_product(pairs[0].vector, pairs[0].vector, toy_problem().B) == pytest.approx(1.0)


def test_exactly_singular_shift_raises():
    m = BandedMatrix.from_dense(np.diag([1.0, 2.0, 3.0]) - 2.0 * np.eye(3), 0, 0)
    with pytest.raises(SingularShiftError):
        banded_lu_factor(m)


def test_singular_shift_retried_with_perturbation():
    # sigma sits exactly on an eigenvalue; the solver must recover on its own
    pairs = shift_invert_eigs(toy_problem(), EigenRequest(sigma=2.0 + 0j, n_eigs=1))
    assert pairs[0].epsilon == pytest.approx(2.0, abs=1e-10)


def test_identity_lu_solves_trivially():
    lu = banded_lu_factor(BandedMatrix.from_dense(np.eye(4, dtype=complex), 1, 1))
    rhs = np.arange(4.0) + 1j
    assert np.allclose(lu.solve(rhs), rhs, atol=1e-15)


def test_field_free_bound_state_has_zero_width():
    ops = build_operators(SturmianBasis(60, 5.0))
    prob = assemble(ops, FloquetConfig(theta=0.15, k_min=-1, k_max=1, F=0.0, omega=0.003))
    pairs = shift_invert_eigs(prob, EigenRequest(sigma=-0.02 + 0j, n_eigs=1, max_iter=80))
    assert pairs[0].epsilon.real == pytest.approx(-0.02, abs=1e-10)
    assert abs(pairs[0].epsilon.imag) <= 1e-12


def test_driven_pairs_match_dense_solver():
    got = shift_invert_eigs(driven_problem(), EigenRequest(sigma=-0.02 + 0j, n_eigs=6, max_iter=200))
    dense = driven_dense_pairs()
    assert len(got) == 6
    for p in got:
        assert p.residual <= 1e-8
        nearest = min(dense, key=lambda q: abs(q.epsilon - p.epsilon))
        assert abs(nearest.epsilon - p.epsilon) < 1e-8
        assert p.epsilon.imag <= 0.0  # widths never push into the upper half-plane


def test_eigenvectors_c_orthogonal_across_distinct_eigenvalues():
    dense = driven_dense_pairs()[:12]
    b = driven_problem().B
    for p, q in itertools.combinations(dense, 2):
        if abs(p.epsilon - q.epsilon) > 1e-8:
            assert abs(c_product(p.vector, q.vector, b)) < 1e-10
        assert abs(c_product(p.vector, p.vector, b) - 1.0) < 1e-10


def test_overlapping_windows_agree():
    omega = driven_problem().config.omega
    first = shift_invert_eigs(driven_problem(), EigenRequest(sigma=-0.02 + 0j, n_eigs=6, max_iter=200))
    second = shift_invert_eigs(
        driven_problem(), EigenRequest(sigma=-0.02 + 0.3 * omega + 0j, n_eigs=6, max_iter=200)
    )
    shared = sum(
        1
        for p in first
        if min(abs(q.epsilon - p.epsilon) for q in second) < 1e-9
    )
    assert shared >= 3


def test_banded_and_sparse_inner_solvers_agree():
    req = dict(sigma=-0.02 + 0j, n_eigs=4, max_iter=200)
    sparse = shift_invert_eigs(driven_problem(), EigenRequest(**req, inner_solver="sparse"))
    banded = shift_invert_eigs(driven_problem(), EigenRequest(**req, inner_solver="banded"))
    for p, q in zip(sparse, banded):
        assert abs(p.epsilon - q.epsilon) < 1e-12


def test_start_vector_steers_the_window():
    ops = build_operators(SturmianBasis(60, 5.0))
    prob = assemble(ops, FloquetConfig(theta=0.15, k_min=-1, k_max=1, F=0.0, omega=0.003))
    coeffs = field_free_state(ops, 5)
    start = np.zeros(prob.block_dim * prob.n_blocks, dtype=complex)
    start[prob.block_index(0) * 60: prob.block_index(0) * 60 + 60] = coeffs
    pairs = shift_invert_eigs(
        prob, EigenRequest(sigma=-0.0201 + 0j, n_eigs=1, max_iter=60, start_vector=start)
    )
    assert pairs[0].epsilon.real == pytest.approx(-0.02, abs=1e-10)
    with pytest.raises(ValueError):
        shift_invert_eigs(prob, EigenRequest(sigma=0j, n_eigs=1, start_vector=np.ones(7)))
    with pytest.raises(ValueError):
        shift_invert_eigs(
            prob,
            EigenRequest(sigma=0j, n_eigs=1, start_vector=np.zeros(prob.block_dim * 3)),
        )


def test_dense_solver_flags_degeneracies():
    pairs = dense_eigs(toy_problem((2.0, 2.0, 5.0)), sigma=2.0 + 0j)
    assert pairs[0].degenerate and pairs[1].degenerate
    assert not pairs[2].degenerate


def test_dense_solver_rejects_large_problems():
    class Big:
        pass

    big = Big()
    big.A = BandedMatrix(2001, 1, 1)
    big.B = BandedMatrix(2001, 1, 1)
    with pytest.raises(ValueError):
        dense_eigs(big)


def test_convergence_error_reports_best_residual():
    prob = driven_problem()
    with pytest.raises(ConvergenceError) as err:
        # tolerance below double precision: exhaustion is certain
        shift_invert_eigs(prob, EigenRequest(sigma=-0.02 + 0j, n_eigs=30, max_iter=32, tol=1e-18))
    assert err.value.best_residual is not None and err.value.best_residual > 0


def test_c_null_vector_cannot_normalize():
    from rydfloq.eigensolve import _c_normalize

    b = BandedMatrix.from_dense(np.eye(2, dtype=complex), 0, 0)
    # (1, -i) is exactly self-orthogonal under the bilinear product
    with pytest.raises(ConvergenceError, match="c-null"):
        _c_normalize(np.array([1.0, -1.0j]), b)


def test_c_null_policy_drops_instead_of_raising():
    from rydfloq.eigensolve import _finalize

    b = BandedMatrix.from_dense(np.eye(2, dtype=complex), 0, 0)
    a = BandedMatrix.from_dense(np.diag([2.0 + 0j, 3.0 + 0j]), 0, 0)
    null_vec = np.array([1.0, -1.0j])
    good_vec = np.array([0.0, 1.0 + 0j])
    args = ([-2.0 + 0j, 3.0 + 0j], [null_vec, good_vec], b,
            a.to_csc(), b.to_csc(), 0j)
    with pytest.raises(ConvergenceError, match="c-null"):
        _finalize(*args, positive_imag_fatal=True)
    pairs = _finalize(*args, positive_imag_fatal=True, drop_c_null=True)
    assert [p.epsilon for p in pairs] == [3.0 + 0j]
