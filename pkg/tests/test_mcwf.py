import numpy as np
import pytest
import scipy.sparse as sp

from tmss.errors import InvalidArgument
from tmss.evolution import EvolutionConfig, grid_config
from tmss.fock import basis_state, make_space
from tmss.master import evolve_me
from tmss.mcwf import (CHUNK_SIZE, TrajectoryConfig, evolve_ensemble, evolve_trajectory,
                       trajectory_stream)
from tmss.model import build_hamiltonian, model_from_ratio
from tmss.observables import record


def test_stream_pinned():
    # Philox-4x64 keyed by (master_seed, index); first uniforms for (12345, 0)
    draws = trajectory_stream(12345, 0).random(3)
    assert np.allclose(draws, [0.64638019, 0.7742676, 0.78643626], atol=1e-8)
    assert not np.allclose(trajectory_stream(12345, 1).random(3), draws)


def test_closed_trajectory_matches_master():
    m = model_from_ratio(2.0)
    space = make_space((6, 14, 14))
    H = build_hamiltonian(m, space)
    psi0 = basis_state(space, (0, 0, 0))
    cfg = EvolutionConfig(m.T_pi, 11, m.T_pi / 400)
    tr = evolve_trajectory(H, 0.0, psi0, cfg, trajectory_stream(1, 0), space=space)
    me = evolve_me(H, 0.0, psi0, cfg, space=space)
    assert tr.jumps == []
    for state, t, row in zip(tr.states, tr.times, me.records):
        assert np.linalg.norm(state) == pytest.approx(1.0, abs=1e-12)
        mine = record(state, t, space=space)
        for name in ("n_cav", "n_1", "n_2", "N_var"):
            assert getattr(mine, name) == pytest.approx(getattr(row, name), abs=1e-8)


def test_waiting_time_exponential():
    space = make_space((1, 1, 1))
    H = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    psi0 = basis_state(space, (1, 0, 0))
    cfg = EvolutionConfig(12.0, 13, 0.02)
    waits = []
    for i in range(2000):
        tr = evolve_trajectory(H, 1.0, psi0, cfg, trajectory_stream(99, i), space=space)
        assert len(tr.jumps) <= 1
        waits.append(tr.jumps[0][0] if tr.jumps else np.inf)
    waits = np.array(waits)
    # the mean of an exponential with the unobserved tail (t > 12, weight 6e-6) ignored
    assert np.mean(waits[np.isfinite(waits)]) == pytest.approx(1.0, rel=0.05)


def test_jump_located_to_tolerance():
    space = make_space((1, 1, 1))
    H = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    cfg = EvolutionConfig(10.0, 11, 0.05)
    stream = trajectory_stream(3, 0)
    u = 1.0 - trajectory_stream(3, 0).random()
    tr = evolve_trajectory(H, 1.0, basis_state(space, (1, 0, 0)), cfg, stream, space=space)
    t, norm_sq = tr.jumps[0]
    assert norm_sq == pytest.approx(u, abs=1e-10)
    assert t == pytest.approx(-np.log(u), abs=1e-6)


def test_single_photon_jumps_once():
    # after the jump the cavity is empty, its norm no longer decays
    space = make_space((1, 1, 1))
    H = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    cfg = EvolutionConfig(50.0, 2, 0.05)
    for i in range(50):
        tr = evolve_trajectory(H, 1.0, basis_state(space, (1, 0, 0)), cfg,
                               trajectory_stream(5, i), space=space)
        assert len(tr.jumps) == 1
        assert np.allclose(tr.states[-1], basis_state(space, (0, 0, 0)))


def test_deterministic_jump_logs():
    m = model_from_ratio(1.5, kappa_over_theta=1.0)
    space = make_space((4, 8, 8))
    H = build_hamiltonian(m, space)
    psi0 = basis_state(space, (0, 0, 0))
    cfg = grid_config(m.theta, m.loss_rate, n_outputs=11)
    run = lambda i: evolve_trajectory(H, m.loss_rate, psi0, cfg, trajectory_stream(7, i), space=space)
    i = next(i for i in range(100) if run(i).jumps)
    a, b = run(i), run(i)
    assert a.jumps == b.jumps
    assert all(np.array_equal(x, y) for x, y in zip(a.states, b.states))


def _ensemble(n_traj, seed=11, threads=1, kot=0.5, cut=(4, 8, 8), n_outputs=21):
    m = model_from_ratio(1.5, kappa_over_theta=kot)
    space = make_space(cut)
    H = build_hamiltonian(m, space)
    cfg = TrajectoryConfig(grid_config(m.theta, m.loss_rate, n_outputs=n_outputs), n_traj, seed)
    return evolve_ensemble(H, m.loss_rate, basis_state(space, (0, 0, 0)), cfg, space=space,
                           target=(m.r, m.squeeze_phase), threads=threads), (m, space, H)


def test_thread_independence():
    one, _ = _ensemble(2 * CHUNK_SIZE + 7, threads=1)
    many, _ = _ensemble(2 * CHUNK_SIZE + 7, threads=3)
    assert one.meta["jump_logs"] == many.meta["jump_logs"]
    for name in ("zeta12", "n_cav", "n_1", "N_var", "fidelity_tmsv"):
        assert np.array_equal(one.column(name), many.column(name), equal_nan=True)
        assert np.array_equal(one.errors[name], many.errors[name], equal_nan=True)


def test_single_trajectory_ensemble():
    ens, (m, space, H) = _ensemble(1, kot=0.0)
    cfg = grid_config(m.theta, 0.0, n_outputs=21)
    tr = evolve_trajectory(H, 0.0, basis_state(space, (0, 0, 0)), cfg, trajectory_stream(11, 0),
                           space=space)
    for state, t, row in zip(tr.states, tr.times, ens.records):
        mine = record(state, t, space=space)
        assert row.n_1 == pytest.approx(mine.n_1, abs=1e-12)
        assert (row.zeta12 is None) == (mine.zeta12 is None)
        if row.zeta12 is not None:
            assert row.zeta12 == pytest.approx(mine.zeta12, abs=1e-10)
    assert np.all(ens.errors["n_1"] == 0)


def test_unbiased_linear_observables():
    ens, (m, space, H) = _ensemble(300, kot=1.0)
    me = evolve_me(H, m.loss_rate, basis_state(space, (0, 0, 0)),
                   grid_config(m.theta, m.loss_rate, n_outputs=21), space=space)
    for name in ("n_cav", "n_1", "N_mean"):
        se = ens.errors[name]
        assert np.all(se >= 0)
        diff = np.abs(ens.column(name) - me.column(name))
        assert np.mean(diff <= 3 * se + 1e-6) >= 0.95


def test_standard_error_scaling():
    ratios = []
    for rep in range(10):
        small, _ = _ensemble(60, seed=1000 + rep, n_outputs=11)
        large, _ = _ensemble(120, seed=2000 + rep, n_outputs=11)
        ratios.append(np.mean(large.errors["n_1"][1:]) / np.mean(small.errors["n_1"][1:]))
    assert np.mean(ratios) == pytest.approx(1 / np.sqrt(2), rel=0.2)


def test_norm_decreases_between_jumps():
    m = model_from_ratio(1.5, kappa_over_theta=1.0)
    space = make_space((4, 8, 8))
    H = build_hamiltonian(m, space)
    from tmss.mcwf import _Engine
    cfg = grid_config(m.theta, m.loss_rate, n_outputs=11)
    eng = _Engine(H, m.loss_rate, space, cfg, 1e-10)
    psi = basis_state(space, (0, 0, 0))
    norms = []
    for _ in range(50):
        psi = eng.step(psi, cfg.dt)
        norms.append(np.vdot(psi, psi).real)
    assert np.all(np.diff(norms) < 0)


def test_invalid_config():
    cfg = grid_config(1.0)
    with pytest.raises(InvalidArgument):
        TrajectoryConfig(cfg, 0)
    space = make_space((1, 1, 1))
    with pytest.raises(InvalidArgument):
        evolve_ensemble(sp.csr_matrix((8, 8)), 1.0, np.ones(8), TrajectoryConfig(cfg, 2), space=space)
