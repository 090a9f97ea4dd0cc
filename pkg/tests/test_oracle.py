"""Grid-propagation reference: bound-state accuracy, unitarity, ionization."""

import math
from functools import lru_cache

import numpy as np
import pytest

import rydfloq.oracle as oracle
from rydfloq.errors import AccuracyError, StepSizeError
from rydfloq.oracle import GridSpec, evolve, grid_bound_states, propagate


def test_grid_spec_validation():
    good = dict(x_max=100.0, n_points=512, absorber_start=80.0, absorber_strength=0.01, dt=0.1)
    GridSpec(**good)
    with pytest.raises(ValueError):
        GridSpec(**{**good, "absorber_start": 100.0})
    with pytest.raises(ValueError):
        GridSpec(**{**good, "absorber_start": -1.0})
    with pytest.raises(ValueError):
        GridSpec(**{**good, "n_points": 255})
    with pytest.raises(ValueError):
        GridSpec(**{**good, "dt": 0.0})
    with pytest.raises(ValueError):
        GridSpec(**{**good, "absorber_strength": -0.01})


def test_grid_points_offset_from_origin():
    g = GridSpec(x_max=100.0, n_points=512, absorber_start=80.0, absorber_strength=0.0, dt=0.1)
    x = g.points()
    assert g.h == pytest.approx(100.0 / 512)
    assert x[0] == pytest.approx(g.h / 2)  # Coulomb term never evaluated at 0
    assert x[-1] == pytest.approx(g.x_max - g.h / 2)


@lru_cache(maxsize=1)
def fine_grid_levels():
    g = GridSpec(x_max=150.0, n_points=98304, absorber_start=120.0, absorber_strength=0.0, dt=0.1)
    return g, *grid_bound_states(g, 5)


def test_bound_energies_match_coulomb_series():
    _, energies, _ = fine_grid_levels()
    for n, e in enumerate(energies, start=1):
        assert e == pytest.approx(-0.5 / n**2, abs=1e-6)


def test_bound_states_orthonormal_and_sign_fixed():
    g, _, states = fine_grid_levels()
    gram = g.h * (states.T @ states)
    assert np.max(np.abs(gram - np.eye(5))) < 1e-10
    assert np.all(states[0] >= 0)


def test_bound_state_request_beyond_box_refused():
    g = GridSpec(x_max=60.0, n_points=512, absorber_start=40.0, absorber_strength=0.0, dt=0.1)
    with pytest.raises(AccuracyError):
        grid_bound_states(g, 5)  # turning point of n=5 does not fit
    with pytest.raises(ValueError):
        grid_bound_states(g, 0)


def test_free_packet_dispersion_matches_closed_form():
    g = GridSpec(x_max=102.4, n_points=8192, absorber_start=90.0, absorber_strength=0.0, dt=0.0125)
    x = g.points()
    a = 1.0 / 16.0  # width 2, far from both walls for the whole run
    x0, t = 51.2, 10.0
    psi0 = (2 * a / math.pi) ** 0.25 * np.exp(-a * (x - x0) ** 2)
    psi = evolve(g, psi0, t, coulomb=False, absorber=False)
    exact = (2 * a / math.pi) ** 0.25 / np.sqrt(1 + 2j * a * t) * np.exp(
        -a * (x - x0) ** 2 / (1 + 2j * a * t)
    )
    assert np.max(np.abs(psi - exact)) < 1e-6


def test_norm_conserved_over_ten_cycles_without_absorber():
    g = GridSpec(x_max=60.0, n_points=1024, absorber_start=40.0, absorber_strength=0.0, dt=0.02)
    _, states = grid_bound_states(g, 4)
    omega = 1.5 / 8  # scaled frequency 1.5 at n0 = 2
    psi = evolve(g, states[:, 1], 10 * 2 * math.pi / omega, F=1.2e-3, omega=omega)
    assert abs(g.h * np.vdot(psi, psi).real - 1.0) < 1e-8


def test_evolve_argument_checks():
    g = GridSpec(x_max=60.0, n_points=512, absorber_start=40.0, absorber_strength=0.0, dt=0.1)
    psi0 = np.zeros(512, dtype=complex)
    psi0[100] = 1.0 / math.sqrt(g.h)
    assert np.array_equal(evolve(g, psi0, 0.0), psi0)
    with pytest.raises(ValueError):
        evolve(g, psi0[:-1], 1.0)
    with pytest.raises(ValueError):
        evolve(g, psi0, -1.0)


def test_zero_field_leaves_state_bound():
    g = GridSpec(x_max=120.0, n_points=2048, absorber_start=90.0, absorber_strength=0.003, dt=0.05)
    assert propagate(3, 0.0, 0.05, 2.0, g) <= 1e-8


def test_propagate_argument_checks():
    g = GridSpec(x_max=120.0, n_points=2048, absorber_start=90.0, absorber_strength=0.003, dt=0.05)
    with pytest.raises(ValueError):
        propagate(0, 0.0, 0.05, 2.0, g)
    with pytest.raises(ValueError):
        propagate(3, 0.0, -0.05, 2.0, g)
    with pytest.raises(ValueError):
        propagate(3, 0.0, 0.05, -2.0, g)


@lru_cache(maxsize=1)
def one_photon_ionization(eta=0.02):
    # scaled field 0.1 at scaled frequency 1.5: roughly tenth-level depletion
    g = GridSpec(x_max=200.0, n_points=2048, absorber_start=120.0, absorber_strength=eta, dt=0.05)
    return propagate(2, 0.1 / 16, 1.5 / 8, 10.0, g)


def test_driven_ionization_is_substantial():
    assert 0.05 < one_photon_ionization() < 0.5


def test_ionization_invariant_under_absorber_doubling():
    assert abs(one_photon_ionization() - one_photon_ionization(eta=0.04)) < 0.01


def test_ionization_grows_with_field():
    g = GridSpec(x_max=200.0, n_points=2048, absorber_start=120.0, absorber_strength=0.02, dt=0.05)
    weak = propagate(2, 0.05 / 16, 1.5 / 8, 10.0, g)
    assert weak < one_photon_ionization()


def test_effective_threshold_cutoff_counts_excited_levels_as_ionized():
    g = GridSpec(x_max=200.0, n_points=2048, absorber_start=120.0, absorber_strength=0.02, dt=0.05)
    loose = propagate(2, 0.1 / 16, 1.5 / 8, 10.0, g)
    tight = propagate(2, 0.1 / 16, 1.5 / 8, 10.0, g, n_eff=2.5)
    assert tight >= loose  # population parked above n = 2.5 now counts


def test_norm_growth_guard(monkeypatch):
    real_solve = oracle.solve_banded

    def inflating(l_and_u, bands, rhs):
        return 1.00001 * real_solve(l_and_u, bands, rhs)

    monkeypatch.setattr(oracle, "solve_banded", inflating)
    g = GridSpec(x_max=60.0, n_points=512, absorber_start=40.0, absorber_strength=0.0, dt=0.1)
    psi0 = np.exp(-((g.points() - 30.0) ** 2))
    psi0 /= math.sqrt(g.h) * np.linalg.norm(psi0)
    with pytest.raises(StepSizeError):
        evolve(g, psi0, 50.0, coulomb=False, absorber=False)


def test_snapshot_round_trip(tmp_path):
    g = GridSpec(x_max=120.0, n_points=2048, absorber_start=90.0, absorber_strength=0.003, dt=0.05)
    path = tmp_path / "final_state.csv"
    propagate(3, 0.0, 0.05, 1.0, g, snapshot_path=path)
    raw = np.loadtxt(path, delimiter=",", skiprows=1)
    assert raw.shape == (2048, 3)
    assert np.allclose(raw[:, 0], g.points())
    psi = raw[:, 1] + 1j * raw[:, 2]
    assert g.h * np.vdot(psi, psi).real == pytest.approx(1.0, abs=1e-6)
