"""Closed-form Heisenberg-picture solution of the lossless model.

The operator vector is ``v = (a, c2, c1^+)``. The Hamiltonian is quadratic and
only mixes these three operators linearly, so ``v(t) = M(t) v(0)`` with a 3x3
matrix that preserves the metric ``diag(1, 1, -1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, UnsupportedRegime
from .model import ModelParams

METRIC = np.diag([1.0, 1.0, -1.0])


@dataclass(frozen=True)
class BogoliubovMatrix:
    t: float
    M: np.ndarray

    def metric_defect(self) -> float:
        """max |M eta M^+ - eta|; zero for a commutator-preserving map."""
        return float(np.max(np.abs(self.M @ METRIC @ self.M.conj().T - METRIC)))


def generator(m: ModelParams) -> np.ndarray:
    """dv/dt = G v for v = (a, c2, c1^+)."""
    xi1, xi2 = m.xi1, m.xi2
    return np.array([[0, -np.conj(xi2), xi1],
                     [xi2, 0, 0],
                     [np.conj(xi1), 0, 0]], dtype=complex)


def bogoliubov(m: ModelParams, t: float) -> BogoliubovMatrix:
    xi1, xi2, th = m.xi1, m.xi2, m.theta
    s, c = math.sin(th * t), math.cos(th * t)
    a1, a2 = abs(xi1) ** 2, abs(xi2) ** 2
    th2 = th * th
    M = np.array([
        [c, -np.conj(xi2) * s / th, xi1 * s / th],
        [xi2 * s / th, (a2 * c - a1) / th2, xi1 * xi2 * (1 - c) / th2],
        [np.conj(xi1) * s / th, -np.conj(xi1 * xi2) * (1 - c) / th2, (a2 - a1 * c) / th2],
    ], dtype=complex)
    return BogoliubovMatrix(float(t), M)


def tpi_map(m: ModelParams) -> tuple[float, complex]:
    """(A, B) with c1(T_pi) = A c1 - B c2^+ and c2(T_pi) = B c1^+ - A c2."""
    a1, a2 = abs(m.xi1) ** 2, abs(m.xi2) ** 2
    th2 = m.theta ** 2
    return (a1 + a2) / th2, 2 * m.xi1 * m.xi2 / th2


@dataclass(frozen=True)
class TMSVAmplitudes:
    amplitudes: np.ndarray
    tail: float
    q: float
    prefactor: float


def tmsv_amplitudes(r: float, nmax: int, phase: float = 0.0) -> TMSVAmplitudes:
    """Amplitudes of sum_n pref * q^n |n>|n> for n = 0..nmax, q = 2r/(1+r^2).

    The prefactor is taken as |1 - r^2|/(1 + r^2) (the sign is a global
    phase). ``phase`` multiplies the n-th amplitude by exp(i n phase); the
    lossless dynamics produce phase = arg(xi1 xi2). ``tail`` is the exact
    probability weight beyond ``nmax``.
    """
    if not r > 1:
        raise UnsupportedRegime(f"two-mode squeezed target requires r > 1, got {r}")
    if nmax < 0 or int(nmax) != nmax:
        raise InvalidArgument(f"nmax must be a nonnegative integer, got {nmax}")
    q = 2 * r / (1 + r * r)
    pref = abs(1 - r * r) / (1 + r * r)
    n = np.arange(int(nmax) + 1)
    amps = pref * q ** n * np.exp(1j * phase * n)
    tail = pref ** 2 * q ** (2 * (nmax + 1)) / (1 - q * q)
    return TMSVAmplitudes(amps, float(tail), q, pref)


def vacuum_moments(m: ModelParams, t: float) -> tuple[float, float, float]:
    """(n_cav, n_1, n_2) at time t for the vacuum initial state."""
    th = m.theta
    s, c = math.sin(th * t), math.cos(th * t)
    a1, a2 = abs(m.xi1) ** 2, abs(m.xi2) ** 2
    n_cav = a1 / th ** 2 * s * s
    n_2 = a1 * a2 / th ** 4 * (1 - c) ** 2
    n_1 = n_cav + n_2
    return n_cav, n_1, n_2


def vacuum_correlations(m: ModelParams, t: float) -> dict[str, complex]:
    """Nonzero second moments of the evolved vacuum.

    Keys: ``n_cav, n_1, n_2`` and the anomalous pair correlations
    ``a_c1 = <a c1>`` and ``c1_c2 = <c1 c2>``; ``<a^+ c2>`` is ``adag_c2``.
    All other normally and anomalously ordered products vanish.
    """
    M = bogoliubov(m, t).M
    # vacuum: <v_j v_k^+> = diag(1, 1, 0) and <v_j^+ v_k> = diag(0, 0, 1)
    up = np.array([1.0, 1.0, 0.0])
    down = np.array([0.0, 0.0, 1.0])
    a_row, c2_row, c1d_row = M
    n_cav = np.sum(np.abs(a_row) ** 2 * down)
    n_2 = np.sum(np.abs(c2_row) ** 2 * down)
    n_1 = np.sum(np.abs(c1d_row) ** 2 * up)
    # c1 = conj(c1d_row) . v^+ ; <a c1> = sum_j a_row_j conj(c1d_row_j) <v_j v_j^+>
    a_c1 = np.sum(a_row * np.conj(c1d_row) * up)
    c1_c2 = np.sum(c2_row * np.conj(c1d_row) * up)
    adag_c2 = np.sum(np.conj(a_row) * c2_row * down)
    return {"n_cav": float(n_cav), "n_1": float(n_1), "n_2": float(n_2),
            "a_c1": complex(a_c1), "c1_c2": complex(c1_c2), "adag_c2": complex(adag_c2)}



def evolve_analytic(m: ModelParams, config, *, target=None, provenance=None):
    """Closed-form vacuum evolution (kappa = 0) on the output grid of ``config``."""
    from .evolution import TimeSeries, params_hash
    from .gaussian import from_ladder, gaussian_record

    if m.loss_rate != 0:
        raise UnsupportedRegime("the closed-form route covers kappa = 0 only")
    records = []
    for t in config.times:
        c = vacuum_correlations(m, t)
        N = np.diag([c["n_cav"], c["n_1"], c["n_2"]]).astype(complex)
        N[0, 2], N[2, 0] = c["adag_c2"], np.conj(c["adag_c2"])
        M = np.zeros((3, 3), dtype=complex)
        M[0, 1] = M[1, 0] = c["a_c1"]
        M[1, 2] = M[2, 1] = c["c1_c2"]
        records.append(gaussian_record(from_ladder(N, M), t, target=target))
    payload = {"xi1": repr(m.xi1), "xi2": repr(m.xi2), "config": config.as_dict()}
    return TimeSeries(config.times, records, "analytic", params_hash(payload), meta=dict(provenance or {}))
