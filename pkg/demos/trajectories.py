"""Quantum trajectories versus the master equation.

Each trajectory follows the non-Hermitian evolution and jumps when a cavity
photon leaks out. Averaging quantum expectations over 200 trajectories
reproduces the master-equation occupations within the quoted standard errors.
The result does not depend on the number of worker threads.
"""
from tmss import (TrajectoryConfig, basis_state, build_hamiltonian, evolve_ensemble, evolve_me,
                  grid_config, make_space, model_from_ratio)

m = model_from_ratio(1.5, kappa_over_theta=1.0)
space = make_space((4, 10, 10))
H = build_hamiltonian(m, space)
psi0 = basis_state(space, (0, 0, 0))
cfg = grid_config(m.theta, m.loss_rate, n_outputs=11)

me = evolve_me(H, m.loss_rate, psi0, cfg, space=space)
mc = evolve_ensemble(H, m.loss_rate, psi0, TrajectoryConfig(cfg, n_traj=200, master_seed=1),
                     space=space, threads=2)

jumps = [len(log) for log in mc.meta["jump_logs"]]
print(f"200 trajectories, {sum(jumps)} photon losses, at most {max(jumps)} in one trajectory\n")
print(f"{'t/T_pi':>7} {'n_1 master':>11} {'n_1 mcwf':>10} {'+/- se':>8} {'zeta12 master':>14} {'zeta12 mcwf':>12}")
for i, t in enumerate(me.times):
    a, b = me.records[i], mc.records[i]
    za = "" if a.zeta12 is None else f"{a.zeta12:.4f}"
    zb = "" if b.zeta12 is None else f"{b.zeta12:.4f}"
    print(f"{t / m.T_pi:7.2f} {a.n_1:11.4f} {b.n_1:10.4f} {mc.errors['n_1'][i]:8.4f} {za:>14} {zb:>12}")

again = evolve_ensemble(H, m.loss_rate, psi0, TrajectoryConfig(cfg, n_traj=200, master_seed=1),
                        space=space, threads=1)
same = all((x == y).all() for x, y in ((mc.column("n_1"), again.column("n_1")),
                                       (mc.errors["n_1"], again.errors["n_1"])))
print(f"\nrerun with one thread is bit-identical: {same}")
