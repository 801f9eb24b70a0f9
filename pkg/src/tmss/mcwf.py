"""Monte Carlo wave-function unravelling of the cavity-loss master equation.

Between jumps the unnormalised state follows ``d psi/dt = -i H_eff psi`` with
``H_eff = H - (i/2) kappa a^+ a``. A jump ``psi -> a psi/|a psi|`` fires when
the squared norm reaches a uniform draw ``u``; the crossing time is found by
bisection on re-integration from the start of the step.

Random streams: trajectory ``i`` draws from
``numpy.random.Generator(Philox(key=[master_seed, i]))`` and nothing else. The
first draw sets the initial threshold and every jump consumes one more draw,
as ``u = 1 - Generator.random()`` so that ``u`` lies in (0, 1].

Trajectories are processed in chunks of ``CHUNK_SIZE`` (fixed, independent of
the worker count), so results depend only on the inputs, ``master_seed`` and
``n_traj``.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .analytic import tmsv_amplitudes
from .errors import InvalidArgument, NumericalFailure
from .evolution import EvolutionConfig, RK4_STABILITY_MARGIN, TimeSeries, params_hash, rk4_step
from .fock import ATOMS1, ATOMS2, CAVITY, CompositeSpace, annihilator
from .master import _block_radius
from .observables import COLUMNS, ZETA_DENOMINATOR_FLOOR, NumberMoments, ObservableRecord, zeta12

CHUNK_SIZE = 50
SEED_MASK = (1 << 64) - 1
# per-trajectory moment columns
_M = ("n_cav", "n1", "n2", "n1_sq", "n2_sq", "n1n2", "N", "N_sq", "fid")


@dataclass(frozen=True)
class TrajectoryConfig:
    evolution: EvolutionConfig
    n_traj: int = 500
    master_seed: int = 0
    jump_tolerance: float = 1e-10

    def __post_init__(self):
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise InvalidArgument(f"n_traj must be a positive integer, got {self.n_traj}")
        if not self.jump_tolerance > 0:
            raise InvalidArgument("jump_tolerance must be positive")


def trajectory_stream(master_seed: int, index: int) -> np.random.Generator:
    key = np.array([int(master_seed) & SEED_MASK, int(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw(stream: np.random.Generator) -> float:
    return 1.0 - stream.random()


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[np.ndarray]
    jumps: list[tuple[float, float]] = field(default_factory=list)


class _Engine:
    """Shared propagation machinery for one (H, kappa, space, config)."""

    def __init__(self, H, kappa, space: CompositeSpace, config: EvolutionConfig,
                 jump_tolerance: float, target=None):
        if kappa < 0:
            raise InvalidArgument(f"kappa must be >= 0, got {kappa}")
        self.space = space
        self.kappa = float(kappa)
        self.a = annihilator(space, CAVITY)
        ncav = space.occupation_table[:, CAVITY].astype(float)
        self.minus_i_heff = (-1j * (sp.csr_matrix(H) - 0.5j * self.kappa * sp.diags(ncav))).tocsr()
        self.config = config
        self.tol = jump_tolerance
        occ = space.occupation_table.astype(float)
        q = space.charge.astype(float)
        n0, n1, n2 = occ[:, CAVITY], occ[:, ATOMS1], occ[:, ATOMS2]
        self.diag_obs = np.stack([n0, n1, n2, n1 * n1, n2 * n2, n1 * n2, q, q * q], axis=1)
        self.pairs = []
        if target is not None:
            nmax = min(space.cutoffs[ATOMS1], space.cutoffs[ATOMS2])
            amps = tmsv_amplitudes(target[0], nmax, target[1]).amplitudes
            for k in range(space.dims[CAVITY]):
                sel = np.nonzero((occ[:, CAVITY] == k) & (occ[:, ATOMS1] == occ[:, ATOMS2])
                                 & (occ[:, ATOMS1] <= nmax))[0]
                self.pairs.append((sel, amps[space.occupation_table[sel, ATOMS1]].conj()))

    def f(self, psi):
        return self.minus_i_heff @ psi

    def step(self, psi, h):
        return rk4_step(self.f, psi, h)

    def moments(self, psi: np.ndarray) -> np.ndarray:
        """(B, 9) per-column expectation values of the normalised states."""
        prob = np.abs(psi) ** 2
        norm = prob.sum(axis=0)
        out = np.empty((psi.shape[1], len(_M)))
        out[:, :8] = (self.diag_obs.T @ prob / norm).T
        fid = np.zeros(psi.shape[1])
        for sel, phi_conj in self.pairs:
            fid += np.abs(phi_conj @ psi[sel]) ** 2
        out[:, 8] = fid / norm if self.pairs else np.nan
        return out

    def resolve(self, psi, h, t0, u, stream, log):
        """Advance one column by h when its norm crosses u within the step."""
        remaining, t = h, t0
        cur = psi
        while True:
            trial = self.step(cur, remaining)
            if np.vdot(trial, trial).real >= u:
                return trial, u
            lo, hi = 0.0, remaining
            state, nsq = trial, np.vdot(trial, trial).real
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                state = self.step(cur, mid)
                nsq = np.vdot(state, state).real
                if abs(nsq - u) <= self.tol or hi - lo <= 1e-15 * h:
                    break
                if nsq > u:
                    lo = mid
                else:
                    hi = mid
            log.append((t + mid, nsq))
            jumped = self.a @ state
            jnorm = math.sqrt(np.vdot(jumped, jumped).real)
            if not jnorm > 1e-300:
                raise NumericalFailure(f"jump from the cavity vacuum at t = {t + mid}")
            cur = jumped / jnorm
            u = _draw(stream)
            t += mid
            remaining -= mid
            if remaining <= 1e-15 * h:
                return cur, u

    def run_chunk(self, psi0, streams, keep_states=False):
        """Propagate len(streams) trajectories; returns moments (n_out, B, 9)."""
        cfg = self.config
        B = len(streams)
        psi = np.repeat(psi0[:, None], B, axis=1)
        u = np.array([_draw(s) for s in streams])
        logs = [[] for _ in range(B)]
        times = cfg.times
        h = cfg.dt
        out = np.empty((len(times), B, len(_M)))
        out[0] = self.moments(psi)
        states = [[psi[:, j] / math.sqrt(np.vdot(psi[:, j], psi[:, j]).real)] for j in range(B)] if keep_states else None
        t = 0.0
        for i in range(1, len(times)):
            for s in range(cfg.substeps):
                t0 = times[i - 1] + s * h
                new = self.step(psi, h)
                nsq = np.einsum("ij,ij->j", new.conj(), new).real
                for j in np.nonzero(nsq < u)[0]:
                    new[:, j], u[j] = self.resolve(psi[:, j], h, t0, u[j], streams[j], logs[j])
                psi = new
            if not np.all(np.isfinite(psi)):
                raise NumericalFailure(f"non-finite wave function at t = {times[i]}")
            out[i] = self.moments(psi)
            if keep_states:
                for j in range(B):
                    states[j].append(psi[:, j] / math.sqrt(np.vdot(psi[:, j], psi[:, j]).real))
        return out, logs, states


def _stability_config(H, kappa, space, psi0, config: EvolutionConfig) -> EvolutionConfig:
    support = {int(q) for q in space.charge[np.abs(psi0) > 0]}
    top = max(support)
    sectors = [q for q in space.sectors if q <= top]
    Hc = sp.csr_matrix(H)
    radius = max(_block_radius(Hc[space.sectors[q]][:, space.sectors[q]]) for q in sectors)
    rate = radius + 0.5 * kappa * space.cutoffs[CAVITY]
    return config.capped(RK4_STABILITY_MARGIN / rate) if rate > 0 else config


def _check_psi0(psi0, space):
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (space.dim,):
        raise InvalidArgument(f"psi0 has shape {psi0.shape}, space dim is {space.dim}")
    if abs(np.vdot(psi0, psi0).real - 1) > 1e-9:
        raise InvalidArgument("psi0 must be normalised")
    return psi0


def evolve_trajectory(H, kappa: float, psi0, config: EvolutionConfig,
                      stream: np.random.Generator, *, space: CompositeSpace,
                      jump_tolerance: float = 1e-10, stability_cap: bool = True) -> Trajectory:
    """One quantum trajectory: normalised states on the grid and the jump log.

    The jump log holds ``(time, squared norm just before the jump)``.
    """
    psi0 = _check_psi0(psi0, space)
    if stability_cap:
        config = _stability_config(H, kappa, space, psi0, config)
    engine = _Engine(H, kappa, space, config, jump_tolerance)
    _, logs, states = engine.run_chunk(psi0, [stream], keep_states=True)
    return Trajectory(config.times, states[0], logs[0])


def _threads() -> int:
    env = os.environ.get("TMSS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def evolve_ensemble(H, kappa: float, psi0, config: TrajectoryConfig, *, space: CompositeSpace,
                    target: Optional[tuple[float, float]] = None, stability_cap: bool = True,
                    threads: Optional[int] = None, provenance: Optional[dict] = None) -> TimeSeries:
    """Trajectory-averaged observables with standard errors.

    zeta12 and N_var are evaluated once from pooled moments; their standard
    errors come from a leave-one-trajectory-out jackknife. Ensemble purity
    is not estimated (column left undefined).
    """
    psi0 = _check_psi0(psi0, space)
    evo = config.evolution
    if stability_cap:
        evo = _stability_config(H, kappa, space, psi0, evo)
    engine = _Engine(H, kappa, space, evo, config.jump_tolerance, target)
    n = int(config.n_traj)
    chunks = [range(s, min(s + CHUNK_SIZE, n)) for s in range(0, n, CHUNK_SIZE)]

    def work(indices):
        streams = [trajectory_stream(config.master_seed, i) for i in indices]
        out, logs, _ = engine.run_chunk(psi0, streams)
        return out, logs

    workers = threads or _threads()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    per_traj = np.concatenate([r[0] for r in results], axis=1)
    jump_logs = [log for r in results for log in r[1]]

    records, errors = _aggregate(per_traj, evo.times, has_fid=target is not None)
    payload = {"H": params_hash({"data": sp.csr_matrix(H).data.tobytes().hex()}),
               "kappa": kappa, "psi0": params_hash({"psi0": psi0.tobytes().hex()}),
               "config": evo.as_dict(), "n_traj": n, "master_seed": config.master_seed,
               "cutoffs": space.cutoffs}
    meta = {"cutoffs": space.cutoffs, "dt": evo.dt, "n_traj": n, "master_seed": config.master_seed,
            "jumps": sum(len(l) for l in jump_logs), "jump_logs": jump_logs}
    if provenance:
        meta.update(provenance)
    return TimeSeries(evo.times, records, "mcwf", params_hash(payload), errors=errors, meta=meta)


def _zeta_from_means(m: np.ndarray) -> np.ndarray:
    n1, n2, n1sq, n2sq, n1n2 = (m[..., _M.index(k)] for k in ("n1", "n2", "n1_sq", "n2_sq", "n1n2"))
    var = (n1sq - n1 ** 2) + (n2sq - n2 ** 2) - 2 * (n1n2 - n1 * n2)
    denom = n1 + n2
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(denom < ZETA_DENOMINATOR_FLOOR, np.nan, np.maximum(var, 0.0) / denom)
    return z


def _nvar_from_means(m: np.ndarray) -> np.ndarray:
    return m[..., _M.index("N_sq")] - m[..., _M.index("N")] ** 2


def _jackknife(stat, per_traj: np.ndarray, total: np.ndarray) -> np.ndarray:
    n = per_traj.shape[1]
    if n < 2:
        return np.zeros(per_traj.shape[0])
    loo = (total[:, None, :] - per_traj) / (n - 1)
    vals = stat(loo)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        centre = np.nanmean(vals, axis=1, keepdims=True)
    return np.sqrt((n - 1) / n * np.sum((vals - centre) ** 2, axis=1))


def _aggregate(per_traj: np.ndarray, times: np.ndarray, has_fid: bool):
    n = per_traj.shape[1]
    total = per_traj.sum(axis=1)
    mean = total / n
    if n > 1:
        se_lin = per_traj.std(axis=1, ddof=1) / math.sqrt(n)
    else:
        se_lin = np.zeros_like(mean)
    z = _zeta_from_means(mean)
    z_se = _jackknife(_zeta_from_means, per_traj, total)
    nvar = _nvar_from_means(mean)
    nvar_se = _jackknife(_nvar_from_means, per_traj, total)
    idx = {k: _M.index(k) for k in _M}
    records = []
    for i, t in enumerate(times):
        zi = None if np.isnan(z[i]) else float(z[i])
        fid = float(mean[i, idx["fid"]]) if has_fid else None
        records.append(ObservableRecord(float(t), zi, float(mean[i, idx["n_cav"]]),
                                        float(mean[i, idx["n1"]]), float(mean[i, idx["n2"]]),
                                        float(mean[i, idx["N"]]), float(max(nvar[i], 0.0)), None, fid))
    errors = {
        "zeta12": np.where(np.isnan(z), np.nan, z_se),
        "n_cav": se_lin[:, idx["n_cav"]],
        "n_1": se_lin[:, idx["n1"]],
        "n_2": se_lin[:, idx["n2"]],
        "N_mean": se_lin[:, idx["N"]],
        "N_var": nvar_se,
        "purity": np.full(len(times), np.nan),
        "fidelity_tmsv": se_lin[:, idx["fid"]] if has_fid else np.full(len(times), np.nan),
    }
    return records, errors
