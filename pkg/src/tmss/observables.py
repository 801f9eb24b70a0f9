"""Observable extraction shared by all solvers.

Every observable in the output schema except purity and the TMSV fidelity
is diagonal in the Fock basis, so the Fock route only needs the basis-state
populations.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .analytic import tmsv_amplitudes
from .errors import InvalidArgument, NumericalFailure, UnsupportedRegime
from .fock import ATOMS1, ATOMS2, CAVITY, BlockDensity, CompositeSpace

ZETA_DENOMINATOR_FLOOR = 1e-12
COLUMNS = ("zeta12", "n_cav", "n_1", "n_2", "N_mean", "N_var", "purity", "fidelity_tmsv")


@dataclass(frozen=True)
class NumberMoments:
    """First and second moments of the two atomic occupation numbers."""

    n1: float
    n2: float
    n1_sq: float
    n2_sq: float
    n1n2: float

    @property
    def difference_variance(self) -> float:
        return (self.n1_sq - self.n1**2) + (self.n2_sq - self.n2**2) - 2 * (self.n1n2 - self.n1 * self.n2)


@dataclass(frozen=True)
class ObservableRecord:
    t: float
    zeta12: Optional[float]
    n_cav: float
    n_1: float
    n_2: float
    N_mean: float
    N_var: float
    purity: Optional[float]
    fidelity_tmsv: Optional[float] = None

    def __post_init__(self):
        for name in ("n_cav", "n_1", "n_2", "N_var"):
            if getattr(self, name) < -1e-9:
                raise NumericalFailure(f"{name} = {getattr(self, name)} is negative at t = {self.t}")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def zeta12(m: NumberMoments) -> Optional[float]:
    """Relative number squeezing var(n1 - n2) / (<n1> + <n2>); None if undefined."""
    denom = m.n1 + m.n2
    if denom < ZETA_DENOMINATOR_FLOOR:
        return None
    var = m.difference_variance
    if var < -1e-9:
        raise NumericalFailure(f"negative variance {var} of n1 - n2")
    return float(max(var, 0.0) / denom)


@dataclass(frozen=True)
class FockMoments:
    n_cav: float
    number: NumberMoments
    N_mean: float
    N_var: float


def moments_from_populations(p: np.ndarray, space: CompositeSpace) -> FockMoments:
    occ = space.occupation_table
    n0 = occ[:, CAVITY].astype(float)
    n1 = occ[:, ATOMS1].astype(float)
    n2 = occ[:, ATOMS2].astype(float)
    q = space.charge.astype(float)
    mean = lambda x: float(p @ x)
    number = NumberMoments(mean(n1), mean(n2), mean(n1 * n1), mean(n2 * n2), mean(n1 * n2))
    N_mean = mean(q)
    return FockMoments(mean(n0), number, N_mean, mean(q * q) - N_mean**2)


def constant_of_motion(rho, space: CompositeSpace) -> tuple[float, float]:
    """Mean and variance of N = n_2 - n_1 + n_cav."""
    m = moments_from_populations(_populations(rho, space), space)
    return m.N_mean, m.N_var


def fidelity_tmsv(rho_atoms: np.ndarray, dims: tuple[int, int], r: float,
                  phase: float = 0.0) -> tuple[float, float]:
    """Overlap of an atomic two-mode state with the truncated TMSV target.

    Returns ``(fidelity, tail)`` where ``tail`` is the target weight lost to
    truncation at ``min(dims) - 1``.
    """
    if not r > 1:
        raise UnsupportedRegime(f"two-mode squeezed target requires r > 1, got {r}")
    d1, d2 = dims
    if rho_atoms.shape != (d1 * d2, d1 * d2):
        raise InvalidArgument(f"rho_atoms has shape {rho_atoms.shape}, dims {dims}")
    nmax = min(d1, d2) - 1
    target = tmsv_amplitudes(r, nmax, phase)
    n = np.arange(nmax + 1)
    idx = n * d2 + n
    sub = rho_atoms[np.ix_(idx, idx)]
    value = np.vdot(target.amplitudes, sub @ target.amplitudes).real
    return float(min(1.0, max(0.0, value))), target.tail


def _populations(rho, space: CompositeSpace) -> np.ndarray:
    if isinstance(rho, BlockDensity):
        return rho.populations()
    rho = np.asarray(rho)
    if rho.ndim == 1:
        return np.abs(rho) ** 2 / np.vdot(rho, rho).real
    return np.diagonal(rho).real.copy()


def record(state, t: float, *, space: Optional[CompositeSpace] = None,
           target: Optional[tuple[float, float]] = None) -> ObservableRecord:
    """Assemble one output row.

    ``state`` is a state vector, dense density matrix or
    :class:`~tmss.fock.BlockDensity` (``space`` required), or a
    :class:`~tmss.gaussian.GaussianState`. ``target = (r, phase)`` enables
    the TMSV fidelity column.
    """
    from .gaussian import GaussianState, gaussian_record

    if isinstance(state, GaussianState):
        return gaussian_record(state, t, target=target)
    if space is None:
        raise InvalidArgument("space is required for Fock-space states")
    p = _populations(state, space)
    m = moments_from_populations(p, space)
    if isinstance(state, BlockDensity):
        pur = state.purity()
    else:
        state = np.asarray(state)
        pur = 1.0 if state.ndim == 1 else float(np.einsum("ij,ji->", state, state).real)
    fid = None
    if target is not None:
        fid = _fock_fidelity(state, space, *target)
    return ObservableRecord(float(t), zeta12(m.number), m.n_cav, m.number.n1, m.number.n2,
                            m.N_mean, m.N_var, pur, fid)


def _fock_fidelity(state, space: CompositeSpace, r: float, phase: float) -> float:
    nmax = min(space.cutoffs[ATOMS1], space.cutoffs[ATOMS2])
    amps = tmsv_amplitudes(r, nmax, phase).amplitudes
    if isinstance(state, BlockDensity):
        value = state.pair_overlap(amps)
    else:
        occ = space.occupation_table
        d0 = space.dims[CAVITY]
        sel = np.nonzero((occ[:, ATOMS1] == occ[:, ATOMS2]) & (occ[:, ATOMS1] <= nmax))[0]
        phi = amps[occ[sel, ATOMS1]]
        cav = occ[sel, CAVITY]
        value = 0.0
        if state.ndim == 1:
            psi = state / np.sqrt(np.vdot(state, state).real)
            for k in range(d0):
                rows = cav == k
                value += abs(np.vdot(phi[rows], psi[sel[rows]])) ** 2
        else:
            for k in range(d0):
                rows = sel[cav == k]
                v = phi[cav == k]
                value += np.vdot(v, state[np.ix_(rows, rows)] @ v).real
    return float(min(1.0, max(0.0, value)))
