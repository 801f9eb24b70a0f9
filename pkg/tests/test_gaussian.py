import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from tmss.analytic import tpi_map, vacuum_moments
from tmss.errors import InvalidArgument
from tmss.evolution import EvolutionConfig, grid_config
from tmss.fock import ATOMS1, ATOMS2, annihilator, make_space
from tmss.gaussian import (OMEGA, GaussianState, cavity_loss_drift, drift_and_diffusion,
                           evolve_gaussian, evolve_moments, fidelity_with_tmsv, from_ladder,
                           ladder_moments, thermal_cavity_state, tmsv_state, vacuum_state,
                           wick_number_moments)
from tmss.model import ModelParams, model_from_ratio
from tmss.observables import zeta12


def test_vacuum_convention():
    s = vacuum_state()
    assert np.array_equal(s.cov, np.eye(6) / 2)
    N, M = ladder_moments(s)
    assert np.allclose(N, 0) and np.allclose(M, 0)
    assert s.purity() == pytest.approx(1.0)


def test_ladder_round_trip():
    s = tmsv_state(1.7, 0.3, nbar_cav=0.4)
    N, M = ladder_moments(s)
    assert np.allclose(from_ladder(N, M).cov, s.cov, atol=1e-13)
    assert s.uncertainty_margin() > -1e-12


def test_pure_damping_fixed_point():
    A, D = cavity_loss_drift(0.7)
    sigma = np.eye(2) / 2
    assert np.allclose(A[:2, :2] @ sigma + sigma @ A[:2, :2].T + D[:2, :2], 0)
    A2, D2 = drift_and_diffusion(ModelParams(1e-150, 2e-150, 0.7))
    assert np.allclose(A2, A) and np.allclose(D2, D)


@given(st.floats(0.05, 3), st.floats(1.01, 5), st.floats(-3, 3), st.floats(-3, 3))
def test_hamiltonian_drift(a, r, p1, p2):
    A, D = drift_and_diffusion(ModelParams(a * np.exp(1j * p1), r * a * np.exp(1j * p2)))
    assert np.abs(A.T @ OMEGA + OMEGA @ A).max() < 1e-12 * max(1.0, r * a)
    assert not D.any()


def test_beam_splitter_conserves_excitations():
    A, _ = drift_and_diffusion(ModelParams(1e-300, 1.3 + 0.4j))
    # d/dt (n_a + n_2) is tr(P (A sigma + sigma A^T)) with P the projector on those quadratures
    P = np.diag([1, 1, 0, 0, 1, 1.0])
    assert np.abs(P @ A + A.T @ P).max() < 1e-12


def test_wick_examples():
    w = wick_number_moments(vacuum_state())
    assert np.allclose(w.n, 0) and np.allclose(w.cov, 0)
    w = wick_number_moments(tmsv_state(2.0))
    assert w.n[1:] == pytest.approx([16 / 9, 16 / 9])
    assert w.cov[1, 1] == pytest.approx(400 / 81)
    assert w.cov[1, 2] == pytest.approx(400 / 81)
    assert zeta12(w.atomic) == pytest.approx(0.0, abs=1e-12)
    N = np.diag([0.0, 0.5, 0.5]).astype(complex)
    w = wick_number_moments(from_ladder(N, np.zeros((3, 3))))
    assert w.cov[1, 2] == pytest.approx(0.0, abs=1e-15)
    assert w.cov[1, 1] == pytest.approx(0.75)
    assert zeta12(w.atomic) == pytest.approx(1.5)
    with pytest.raises(InvalidArgument):
        wick_number_moments(GaussianState(np.ones(6), np.eye(6) / 2))


def _tpi_fock_state(m, cut):
    """Two-mode squeeze of vacuum built from the tpi_map on a truncated space."""
    space = make_space((1, cut, cut))
    a1, a2 = annihilator(space, ATOMS1).toarray(), annihilator(space, ATOMS2).toarray()
    A, B = tpi_map(m)
    eps = math.acosh(A)
    phase = np.angle(B)
    G = eps * (np.exp(1j * phase) * a1.conj().T @ a2.conj().T - np.exp(-1j * phase) * a1 @ a2)
    psi = expm(G)[:, 0]
    return space, psi


def test_wick_matches_fock_fourth_moments():
    m = model_from_ratio(3.0)
    space, psi = _tpi_fock_state(m, 25)
    p = np.abs(psi) ** 2
    occ = space.occupation_table
    n1, n2 = occ[:, ATOMS1], occ[:, ATOMS2]
    fock = (p @ n1, p @ (n1 * n1) - (p @ n1) ** 2, p @ (n1 * n2) - (p @ n1) * (p @ n2))
    w = wick_number_moments(tmsv_state(m.r, m.squeeze_phase))
    assert (w.n[1], w.cov[1, 1], w.cov[1, 2]) == pytest.approx(fock, abs=1e-6)


def test_closed_evolution_matches_analytic():
    m = model_from_ratio(2.0)
    cfg = grid_config(m.theta, 0.0, n_outputs=41)
    ts = evolve_gaussian(m, vacuum_state(), cfg, target=(m.r, m.squeeze_phase))
    for t, row in zip(ts.times, ts.records):
        assert (row.n_cav, row.n_1, row.n_2) == pytest.approx(vacuum_moments(m, t), abs=1e-10)
    at = ts.at(m.T_pi)
    assert at.zeta12 <= 1e-10 and at.n_cav <= 1e-10
    assert at.n_1 == pytest.approx(16 / 9, abs=1e-10)
    assert at.fidelity_tmsv == pytest.approx(1.0, abs=1e-10)


def test_rk4_stepper_agrees():
    m = model_from_ratio(1.5, kappa_over_theta=0.5)
    cfg = grid_config(m.theta, m.loss_rate, n_outputs=21)
    exact = evolve_gaussian(m, vacuum_state(), cfg)
    rk4 = evolve_gaussian(m, vacuum_state(), cfg, stepper="rk4")
    assert np.nanmax(np.abs(exact.column("zeta12") - rk4.column("zeta12"))) < 1e-6
    with pytest.raises(InvalidArgument):
        evolve_gaussian(m, vacuum_state(), cfg, stepper="euler")


def test_thermal_cavity_independence():
    m = ModelParams(0.5 + 0.2j, 1.1 - 0.3j)
    cfg = EvolutionConfig(m.T_pi, 11, m.T_pi / 100)
    a = evolve_gaussian(m, vacuum_state(), cfg).final_state
    b = evolve_gaussian(m, thermal_cavity_state(0.5), cfg).final_state
    assert np.abs(a.cov[2:, 2:] - b.cov[2:, 2:]).max() <= 1e-10


@given(st.floats(0.1, 3), st.floats(1.1, 4), st.floats(0, 3))
@settings(max_examples=20, deadline=None)
def test_symplectic_spectrum_conserved(a, r, t):
    m = ModelParams(a, r * a)
    s0 = thermal_cavity_state(0.3)
    cfg = EvolutionConfig(max(t, 1e-3), 2, max(t, 1e-3))
    s1 = evolve_gaussian(m, s0, cfg).final_state
    assert np.allclose(s1.symplectic_eigenvalues(), s0.symplectic_eigenvalues(), atol=1e-9)


def test_decay_matches_exponential():
    A, D = cavity_loss_drift(1.0)
    cfg = EvolutionConfig(5.0, 51, 0.1)
    ts = evolve_moments(A, D, thermal_cavity_state(1.0), cfg)
    assert np.abs(ts.column("n_cav") - np.exp(-ts.times)).max() < 1e-12


def test_lossy_state_is_physical():
    m = model_from_ratio(1.5, kappa_over_theta=1.0)
    ts = evolve_gaussian(m, vacuum_state(), grid_config(m.theta, m.loss_rate, n_outputs=21))
    assert ts.final_state.uncertainty_margin() > -1e-9
    assert 0 < ts.records[-1].purity < 1
    assert fidelity_with_tmsv(ts.final_state, m.r) < 1
