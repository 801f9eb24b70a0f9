"""Two-mode squeezing of the atomic ensembles in the lossless case.

Starting from the joint vacuum, the truncated Fock-space solver is run for
one preparation time T_pi at r = |xi2/xi1| = 2 and compared with the
closed-form occupations and the target two-mode squeezed vacuum.
"""
import numpy as np

from tmss import (basis_state, build_hamiltonian, evolve_me, grid_config, make_space,
                  model_from_ratio, vacuum_moments)

m = model_from_ratio(2.0)
print(f"r = {m.r}, epsilon = {m.epsilon:.4f}, target pair occupation sinh^2(eps) = {m.mean_pair_occupation:.4f}")

space = make_space((12, 32, 32))
cfg = grid_config(m.theta, 0.0, n_outputs=21)
ts = evolve_me(build_hamiltonian(m, space), 0.0, basis_state(space, (0, 0, 0)), cfg,
               space=space, target=(m.r, m.squeeze_phase))

print(f"{'t/T_pi':>7} {'n_cav':>10} {'n_1':>10} {'exact n_1':>10} {'zeta12':>10} {'fidelity':>9}")
for t, row in zip(ts.times, ts.records):
    exact = vacuum_moments(m, t)[1]
    zeta = "" if row.zeta12 is None else f"{row.zeta12:.2e}"
    print(f"{t / m.T_pi:7.2f} {row.n_cav:10.2e} {row.n_1:10.6f} {exact:10.6f} {zeta:>10} {row.fidelity_tmsv:9.6f}")

at = ts.at(m.T_pi)
print(f"\nat T_pi: cavity back in vacuum (n_cav = {at.n_cav:.1e}),"
      f" zeta12 = {at.zeta12:.1e}, overlap with the target state = {at.fidelity_tmsv:.6f}")
print(f"constant of motion stays at zero: max |<N>| = {np.abs(ts.column('N_mean')).max():.1e}")
