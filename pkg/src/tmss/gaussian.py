"""Exact moment dynamics for the quadratic model with linear cavity loss.

Quadrature ordering is ``(x_a, p_a, x_1, p_1, x_2, p_2)`` with
``x = (b + b^+)/sqrt(2)``, ``p = (b - b^+)/(i sqrt(2))`` and the symmetrised
covariance ``sigma_jk = <{dR_j, dR_k}>/2``, so the vacuum has ``sigma = I/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .errors import InvalidArgument, NumericalFailure
from .evolution import EvolutionConfig, TimeSeries, params_hash, rk4_step
from .model import ModelParams
from .observables import NumberMoments, ObservableRecord, zeta12

N_MODES = 3
OMEGA = np.kron(np.eye(N_MODES), np.array([[0.0, 1.0], [-1.0, 0.0]]))

# z = (b_0, b_1, b_2, b_0^+, b_1^+, b_2^+) = W R
W = np.zeros((2 * N_MODES, 2 * N_MODES), dtype=complex)
for _j in range(N_MODES):
    W[_j, 2 * _j], W[_j, 2 * _j + 1] = 1 / math.sqrt(2), 1j / math.sqrt(2)
    W[N_MODES + _j, 2 * _j], W[N_MODES + _j, 2 * _j + 1] = 1 / math.sqrt(2), -1j / math.sqrt(2)
W_INV = np.linalg.inv(W)

CHARGE_WEIGHTS = np.array([1.0, -1.0, 1.0])  # N = n_cav - n_1 + n_2


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(2 * N_MODES)
        cov = np.asarray(self.cov, dtype=float).reshape(2 * N_MODES, 2 * N_MODES)
        if np.max(np.abs(cov - cov.T)) > 1e-12 * max(1.0, np.max(np.abs(cov))):
            raise InvalidArgument("covariance matrix is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    def uncertainty_margin(self) -> float:
        """Smallest eigenvalue of sigma + i Omega/2 (>= 0 for physical states)."""
        return float(np.linalg.eigvalsh(self.cov + 0.5j * OMEGA)[0])

    def purity(self) -> float:
        return float(1.0 / math.sqrt(np.linalg.det(2 * self.cov)))

    def symplectic_eigenvalues(self) -> np.ndarray:
        ev = np.linalg.eigvals(1j * OMEGA @ self.cov)
        return np.sort(np.abs(ev.real))[::2]


def vacuum_state() -> GaussianState:
    return GaussianState(np.zeros(6), 0.5 * np.eye(6))


def thermal_cavity_state(nbar: float) -> GaussianState:
    if nbar < 0:
        raise InvalidArgument(f"nbar must be >= 0, got {nbar}")
    cov = 0.5 * np.eye(6)
    cov[0, 0] = cov[1, 1] = nbar + 0.5
    return GaussianState(np.zeros(6), cov)


def from_ladder(N: np.ndarray, M: np.ndarray) -> GaussianState:
    """Zero-mean state from N_jk = <b_j^+ b_k> and M_jk = <b_j b_k>."""
    N = np.asarray(N, dtype=complex)
    M = np.asarray(M, dtype=complex)
    S = np.block([[M, np.eye(N_MODES) + N.T], [N, M.conj()]])
    R = W_INV @ S @ W_INV.T
    return GaussianState(np.zeros(6), R.real)


def ladder_moments(s: GaussianState) -> tuple[np.ndarray, np.ndarray]:
    """(N, M) with N_jk = <b_j^+ b_k>, M_jk = <b_j b_k> for the zero-mean part."""
    S = W @ (s.cov + 0.5j * OMEGA) @ W.T
    return S[N_MODES:, :N_MODES], S[:N_MODES, :N_MODES]


def tmsv_state(r: float, phase: float = 0.0, nbar_cav: float = 0.0) -> GaussianState:
    """Atoms in the ideal two-mode squeezed vacuum for ratio r; cavity thermal."""
    from .model import squeezing_parameter

    eps = squeezing_parameter(r)
    N = np.diag([nbar_cav, math.sinh(eps) ** 2, math.sinh(eps) ** 2]).astype(complex)
    M = np.zeros((3, 3), dtype=complex)
    M[1, 2] = M[2, 1] = np.exp(1j * phase) * math.sinh(eps) * math.cosh(eps)
    return from_ladder(N, M)


def drift_and_diffusion(m: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature drift A and diffusion D of the moment equations.

    d mean/dt = A mean and d sigma/dt = A sigma + sigma A^T + D.
    """
    kappa = m.loss_rate
    K = np.zeros((6, 6), dtype=complex)
    K[0, 0] = -0.5 * kappa
    K[0, 4] = m.xi1             # a <- c1^+
    K[0, 2] = -np.conj(m.xi2)   # a <- c2
    K[1, 3] = m.xi1             # c1 <- a^+
    K[2, 0] = m.xi2             # c2 <- a
    for j in range(3):
        K[3 + j] = np.conj(np.roll(K[j], 3))
    A = W_INV @ K @ W
    D = np.zeros((6, 6))
    D[0, 0] = D[1, 1] = 0.5 * kappa
    return A.real.copy(), D


def cavity_loss_drift(kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """Drift and diffusion with no coherent coupling (pure cavity damping)."""
    A = np.zeros((6, 6))
    A[0, 0] = A[1, 1] = -0.5 * kappa
    D = np.zeros((6, 6))
    D[0, 0] = D[1, 1] = 0.5 * kappa
    return A, D


def _exact_propagator(A: np.ndarray, D: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Phi = exp(A h) and Q = int_0^h exp(A s) D exp(A^T s) ds (Van Loan)."""
    n = A.shape[0]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = -A
    block[:n, n:] = D
    block[n:, n:] = A.T
    F = expm(block * h)
    phi_T = F[n:, n:]
    Q = phi_T.T @ F[:n, n:]
    return phi_T.T, 0.5 * (Q + Q.T)


def evolve_gaussian(m: ModelParams, s0: GaussianState, config: EvolutionConfig, *,
                    stepper: str = "exact", target: Optional[tuple[float, float]] = None,
                    provenance: Optional[dict] = None) -> TimeSeries:
    """Propagate mean and covariance and emit a record at every output time.

    ``stepper="exact"`` applies the closed-form one-interval propagator;
    ``stepper="rk4"`` uses the shared RK4 stepper with ``config.dt``.
    """
    A, D = drift_and_diffusion(m)
    payload = {"xi1": repr(m.xi1), "xi2": repr(m.xi2), "kappa": m.loss_rate}
    return evolve_moments(A, D, s0, config, stepper=stepper, target=target,
                          provenance=provenance, payload=payload)


def evolve_moments(A: np.ndarray, D: np.ndarray, s0: GaussianState, config: EvolutionConfig, *,
                   stepper: str = "exact", target: Optional[tuple[float, float]] = None,
                   provenance: Optional[dict] = None, payload: Optional[dict] = None) -> TimeSeries:
    """Propagate a Gaussian state under drift ``A`` and diffusion ``D``."""
    times = config.times
    mean, cov = s0.mean.copy(), s0.cov.copy()
    if stepper == "exact":
        phi, Q = _exact_propagator(A, D, config.spacing)

        def advance(mean, cov):
            return phi @ mean, phi @ cov @ phi.T + Q
    elif stepper == "rk4":
        def f(y):
            mu, sig = y[:6], y[6:].reshape(6, 6)
            dsig = A @ sig + sig @ A.T + D
            return np.concatenate([A @ mu, dsig.ravel()])

        def advance(mean, cov):
            y = np.concatenate([mean, cov.ravel()])
            for _ in range(config.substeps):
                y = rk4_step(f, y, config.dt)
            return y[:6], y[6:].reshape(6, 6)
    else:
        raise InvalidArgument(f"unknown stepper {stepper!r}")

    state = GaussianState(mean, cov)
    records = [gaussian_record(state, 0.0, target=target)]
    for t in times[1:]:
        mean, cov = advance(mean, cov)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise NumericalFailure(f"non-finite moments at t = {t}")
        state = GaussianState(mean, cov)
        if state.uncertainty_margin() < -1e-6:
            raise NumericalFailure(f"uncertainty relation violated at t = {t}")
        records.append(gaussian_record(state, t, target=target))
    payload = dict(payload or {"A": A.tolist(), "D": D.tolist()})
    payload.update(s0=s0.cov.tolist(), config=config.as_dict(), stepper=stepper)
    meta = {"stepper": stepper}
    if provenance:
        meta.update(provenance)
    return TimeSeries(times, records, "gaussian", params_hash(payload), meta=meta,
                      final_state=state)


@dataclass(frozen=True)
class WickMoments:
    """Occupations and number covariances of (cavity, atoms-1, atoms-2)."""

    n: np.ndarray
    cov: np.ndarray

    @property
    def atomic(self) -> NumberMoments:
        n1, n2 = self.n[1], self.n[2]
        return NumberMoments(n1, n2, self.cov[1, 1] + n1 * n1, self.cov[2, 2] + n2 * n2,
                             self.cov[1, 2] + n1 * n2)


def wick_number_moments(s: GaussianState) -> WickMoments:
    if np.max(np.abs(s.mean)) > 1e-9:
        raise InvalidArgument("Wick number moments implemented for zero-mean states only")
    N, M = ladder_moments(s)
    n = N.diagonal().real.copy()
    cov = np.abs(M) ** 2 + np.abs(N) ** 2
    # diagonal: var(n) = n(n+1) + |<b b>|^2
    cov[np.diag_indices(3)] = n * (n + 1) + np.abs(M.diagonal()) ** 2
    return WickMoments(n, cov)


def fidelity_with_tmsv(s: GaussianState, r: float, phase: float = 0.0) -> float:
    """Overlap of the atomic reduced state with the ideal two-mode squeezed vacuum."""
    target = tmsv_state(r, phase)
    atoms = slice(2, 6)
    total = s.cov[atoms, atoms] + target.cov[atoms, atoms]
    return float(min(1.0, 1.0 / math.sqrt(np.linalg.det(total))))


def gaussian_record(s: GaussianState, t: float, *,
                    target: Optional[tuple[float, float]] = None) -> ObservableRecord:
    w = wick_number_moments(s)
    N_mean = float(CHARGE_WEIGHTS @ w.n)
    N_var = float(CHARGE_WEIGHTS @ w.cov @ CHARGE_WEIGHTS)
    fid = None if target is None else fidelity_with_tmsv(s, *target)
    return ObservableRecord(float(t), zeta12(w.atomic), float(w.n[0]), float(w.n[1]),
                            float(w.n[2]), N_mean, N_var, s.purity(), fid)
