import cmath
import functools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rydfloq.basis import SturmianBasis, build_operators, field_free_spectrum
from rydfloq.eigensolve import EigenRequest, shift_invert_eigs
from rydfloq.floquet import FloquetConfig, assemble, block_count_heuristic, embed_initial


@functools.lru_cache(maxsize=None)
def small_ops(nb=30, alpha=4.0):
    return build_operators(SturmianBasis(nb, alpha))


def test_config_validation():
    good = dict(theta=0.15, k_min=-2, k_max=3, F=1e-4, omega=0.01)
    FloquetConfig(**good)
    for bad in (
        dict(good, theta=-0.1),
        dict(good, theta=1.6),
        dict(good, k_min=1),
        dict(good, k_max=-1),
        dict(good, F=-1e-9),
        dict(good, omega=0.0),
    ):
        with pytest.raises(ValueError):
            FloquetConfig(**bad)


def test_assemble_matches_dense_reference():
    ops = small_ops(7, 2.0)
    cfg = FloquetConfig(theta=0.12, k_min=-2, k_max=3, F=3e-4, omega=0.01)
    prob = assemble(ops, cfg)
    nb, nblk = 7, 6
    assert prob.block_dim == nb and prob.n_blocks == nblk
    assert prob.A.dim == nb * nblk
    assert prob.A.kl == prob.A.ku == nb + 2  # total bandwidth 2 N_b + 4

    K, C, S, X = (getattr(ops, n).to_dense() for n in "KCSX")
    dense = np.zeros((nb * nblk, nb * nblk), dtype=complex)
    for b, k in enumerate(range(cfg.k_min, cfg.k_max + 1)):
        o = nb * b
        dense[o:o + nb, o:o + nb] = (
            cmath.exp(-2j * cfg.theta) * K - cmath.exp(-1j * cfg.theta) * C - k * cfg.omega * S
        )
        if k < cfg.k_max:
            cross = 0.5 * cfg.F * cmath.exp(1j * cfg.theta) * X
            dense[o:o + nb, o + nb:o + 2 * nb] = cross
            dense[o + nb:o + 2 * nb, o:o + nb] = cross
    assert np.array_equal(prob.A.to_dense(), dense)
    assert np.array_equal(prob.B.to_dense(), np.kron(np.eye(nblk), S).astype(complex))


def test_assembled_matrices_exactly_symmetric():
    prob = assemble(small_ops(), FloquetConfig(theta=0.3, k_min=-3, k_max=4, F=5e-4, omega=0.02))
    a = prob.A.to_dense()
    b = prob.B.to_dense()
    assert np.array_equal(a, a.T)
    assert np.array_equal(b, b.T)


def test_single_block_zero_rotation_is_field_free():
    ops = small_ops()
    prob = assemble(ops, FloquetConfig(theta=0.0, k_min=0, k_max=0, F=0.0, omega=0.02))
    import scipy.linalg

    eigs = scipy.linalg.eig(prob.A.to_dense(), prob.B.to_dense())[0]
    reference = field_free_spectrum(ops)[0]
    assert np.max(np.abs(np.sort(eigs.real) - reference)) < 1e-10
    assert np.min(np.abs(eigs - (-0.5 / 16))) < 1e-10  # contains -1/(2 n0^2) for n0 = 4


def test_replicated_blocks_shift_by_omega():
    ops = small_ops()
    omega = 0.02
    prob = assemble(ops, FloquetConfig(theta=0.0, k_min=-1, k_max=1, F=0.0, omega=omega))
    import scipy.linalg

    eigs = np.sort(scipy.linalg.eig(prob.A.to_dense(), prob.B.to_dense())[0].real)
    reference = field_free_spectrum(ops)[0]
    expected = np.sort(np.concatenate([reference - omega, reference, reference + omega]))
    assert np.max(np.abs(eigs - expected)) < 1e-10


def test_bound_states_independent_of_theta():
    ops = small_ops()
    target = -0.5 / 16
    values = []
    for theta in (0.15, 0.30):
        prob = assemble(ops, FloquetConfig(theta=theta, k_min=-1, k_max=1, F=0.0, omega=0.02))
        pairs = shift_invert_eigs(prob, EigenRequest(sigma=target + 0j, n_eigs=1, max_iter=80))
        values.append(pairs[0].epsilon)
    assert abs(values[0] - values[1]) < 1e-8
    assert abs(values[0] - target) < 1e-9


def test_resonances_stable_under_theta_change(driven_problem_pairs):
    # true resonances stay put when the dilation angle grows by half; only
    # rotated-continuum discretization states may wander with theta
    pairs_a, pairs_b = driven_problem_pairs
    drifts = [
        min(abs(q.epsilon - p.epsilon) for q in pairs_b)
        for p in pairs_a
    ]
    assert sum(d < 1e-6 for d in drifts) >= len(pairs_a) - 1
    dressed = min(pairs_a, key=lambda p: abs(p.epsilon + 0.02))
    partner = min(pairs_b, key=lambda q: abs(q.epsilon - dressed.epsilon))
    assert abs(partner.epsilon - dressed.epsilon) < 1e-9
    assert dressed.epsilon.imag < -1e-7  # the driven state acquired a width


@pytest.fixture(scope="module")
def driven_problem_pairs():
    ops = build_operators(SturmianBasis(60, 5.0))
    out = []
    for theta in (0.15, 0.225):
        prob = assemble(ops, FloquetConfig(theta=theta, k_min=-3, k_max=3, F=2e-4, omega=0.003))
        out.append(shift_invert_eigs(prob, EigenRequest(sigma=-0.02 + 0j, n_eigs=6, max_iter=200)))
    return out


def test_quasi_energy_periodicity_of_window_shift():
    # relabeling photon blocks k -> k+1 shifts every quasi-energy by -omega
    ops = build_operators(SturmianBasis(60, 5.0))
    omega = 0.003
    windows = []
    for k_min, k_max, sigma in ((-3, 3, -0.02), (-2, 4, -0.02 - omega)):
        prob = assemble(ops, FloquetConfig(theta=0.15, k_min=k_min, k_max=k_max, F=2e-4, omega=omega))
        windows.append(shift_invert_eigs(prob, EigenRequest(sigma=sigma + 0j, n_eigs=4, max_iter=200)))
    for p in windows[0]:
        assert min(abs(p.epsilon - (q.epsilon + omega)) for q in windows[1]) < 1e-8


def test_embed_initial_places_block_zero():
    ops = small_ops(7, 2.0)
    prob = assemble(ops, FloquetConfig(theta=0.1, k_min=-2, k_max=1, F=1e-4, omega=0.01))
    coeffs = np.arange(1.0, 8.0)
    full = embed_initial(prob, coeffs)
    assert full.shape == (28,)
    start = prob.block_index(0) * 7
    assert np.array_equal(full[start:start + 7].real, coeffs)
    assert not full[:start].any() and not full[start + 7:].any()
    with pytest.raises(ValueError):
        embed_initial(prob, np.ones(6))
    with pytest.raises(ValueError):
        prob.block_index(5)


def test_block_count_heuristic_examples():
    # single-photon analog: k_max at least 1 + default margin
    k_min, k_max = block_count_heuristic(230, 32.4, 0.0, 270.0)
    assert k_max >= 5 and k_min <= -4
    # ten-photon case: additive margin
    k_min, k_max = block_count_heuristic(20, 0.093, 0.0, 21.0)
    photons = (0.5 / 20**2 - 0.5 / 21**2) / (0.093 / 20**3)
    assert 9 < photons <= 10
    assert k_max >= 14
    # the window always covers ionization into the true continuum
    k_min, k_max = block_count_heuristic(20, 0.44, 0.0, 70.0)
    assert k_max >= np.ceil((0.5 / 400) / (0.44 / 8000)) + 4
    # stronger fields widen the window on both sides
    k_min_f, k_max_f = block_count_heuristic(20, 0.44, 0.08, 70.0)
    assert k_max_f > k_max and k_min_f < k_min
    # clamping
    assert block_count_heuristic(90, 0.05, 0.0, 100.0, cap=16) == (-4, 16)
    with pytest.raises(ValueError):
        block_count_heuristic(0, 1.0, 0.0, 10.0)


def test_quasi_energies_converged_in_block_margin():
    ops = small_ops(30, 2.0)
    omega = 0.125  # about one photon to the continuum from n0 = 2
    field = 1e-3
    results = []
    for margin in (4, 8):
        k_min, k_max = block_count_heuristic(2, omega * 8, field * 16, margin=margin)
        prob = assemble(ops, FloquetConfig(theta=0.15, k_min=k_min, k_max=k_max, F=field, omega=omega))
        results.append(shift_invert_eigs(prob, EigenRequest(sigma=-0.125 + 0j, n_eigs=3, max_iter=150)))
    for p in results[0]:
        assert min(abs(p.epsilon - q.epsilon) for q in results[1]) < 1e-8
