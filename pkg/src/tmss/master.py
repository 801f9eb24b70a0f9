"""Lindblad master equation for cavity loss on the truncated Fock space.

    d rho/dt = -i[H, rho] + kappa (a rho a^+ - {a^+ a, rho}/2)

integrated with fixed-step RK4. ``kappa`` here is the Lindblad rate; use
``ModelParams.loss_rate`` to honour the configured kappa convention.

The solver stores rho as charge blocks (see :class:`tmss.fock.BlockDensity`).
H keeps every block inside its sector pair and the jump term feeds block
``(N+1, N'+1)`` into ``(N, N')``, so the set of blocks reachable from the
initial state is known up front. Only the lower triangle ``N >= N'`` is
stored; the rest follows from hermiticity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .errors import ConvergenceFailure, InvalidArgument, NumericalFailure, StepSizeTooLarge
from .evolution import (EvolutionConfig, TimeSeries, max_abs_difference, params_hash,
                        rk4_step, snap_dt, RK4_STABILITY_MARGIN)
from .fock import CAVITY, BlockDensity, CompositeSpace, annihilator, number_op
from .observables import record

TRACE_TOLERANCE = 1e-6


def default_cutoffs(r: float) -> tuple[int, int, int]:
    """Starting cutoffs (cavity, atoms-1, atoms-2): (8,16,16) for r >= 2, else (10,24,24).

    Smaller r means a larger pair occupation and slower truncation convergence.
    """
    return (8, 16, 16) if r >= 2 else (10, 24, 24)


def liouvillian_apply(H: sp.spmatrix, kappa: float, rho: np.ndarray,
                      space: CompositeSpace) -> np.ndarray:
    """d rho/dt for a dense density matrix."""
    if kappa < 0:
        raise InvalidArgument(f"kappa must be >= 0, got {kappa}")
    if H.shape != (space.dim, space.dim) or rho.shape != (space.dim, space.dim):
        raise InvalidArgument(f"dimension mismatch: H {H.shape}, rho {rho.shape}, dim {space.dim}")
    out = -1j * (H @ rho - rho @ H)
    if kappa:
        a = annihilator(space, CAVITY)
        n = space.occupation_table[:, CAVITY].astype(float)
        out += kappa * (a @ (a @ rho.conj().T).conj().T)
        out -= 0.5 * kappa * (n[:, None] * rho + rho * n[None, :])
    return np.asarray(out)


def _block_radius(block: sp.spmatrix) -> float:
    if block.nnz == 0:
        return 0.0
    if block.shape[0] <= 400:
        return float(np.max(np.abs(np.linalg.eigvalsh(block.toarray()))))
    ev = sla.eigsh(block, k=1, which="LM", return_eigenvectors=False, tol=1e-6)
    return float(abs(ev[0])) * 1.01


def spectral_radius(H: sp.spmatrix, space: CompositeSpace, sectors=None) -> float:
    """Largest |eigenvalue| of H over the requested charge sectors."""
    if sectors is None:
        sectors = space.sectors.keys()
    H = sp.csr_matrix(H)
    return max(_block_radius(H[space.sectors[q]][:, space.sectors[q]]) for q in sectors)


class BlockLiouvillian:
    """The master-equation generator restricted to a closed set of charge blocks."""

    def __init__(self, H: sp.spmatrix, kappa: float, space: CompositeSpace,
                 keys: list[tuple[int, int]]):
        self.space = space
        self.kappa = float(kappa)
        self.keys = sorted(keys, key=lambda k: (-k[0], -k[1]))
        sectors = space.sectors
        a = annihilator(space, CAVITY)
        ncav = space.occupation_table[:, CAVITY].astype(float)
        H = sp.csr_matrix(H)
        needed = {q for k in self.keys for q in k}
        self.H = {q: H[sectors[q]][:, sectors[q]].tocsr() for q in needed}
        self.n = {q: ncav[sectors[q]] for q in needed}
        # K = -iH - (kappa/2) n_cav, so the no-jump part is K rho + rho K^+
        self.K = {q: (-1j * self.H[q] - sp.diags(0.5 * self.kappa * self.n[q])).tocsr()
                  for q in needed}
        self.Kh = {q: self.K[q].conj().T.tocsr() for q in needed}
        self.A, self.Adag = {}, {}
        for q in needed:
            if q + 1 in sectors:
                block = a[sectors[q]][:, sectors[q + 1]].tocsr()
                self.A[q] = block
                self.Adag[q] = block.conj().T.tocsr()
        self.shapes, self.offsets = {}, {}
        off = 0
        for k in self.keys:
            shape = (len(sectors[k[0]]), len(sectors[k[1]]))
            self.shapes[k], self.offsets[k] = shape, off
            off += shape[0] * shape[1]
        self.size = off
        keyset = set(self.keys)
        self.sources = {k: (k[0] + 1, k[1] + 1) for k in self.keys
                        if self.kappa and (k[0] + 1, k[1] + 1) in keyset}

    @classmethod
    def for_state(cls, H, kappa, space: CompositeSpace, rho0: BlockDensity,
                  max_jumps: Optional[int] = None) -> "BlockLiouvillian":
        keys = set()
        for (q, qp), block in rho0.blocks.items():
            if q >= qp and np.any(block):
                keys.add((q, qp))
        if kappa:
            frontier = list(keys)
            sectors = space.sectors
            for q, qp in frontier:
                k = 1
                while (q - k in sectors and qp - k in sectors
                       and (max_jumps is None or k <= max_jumps)):
                    keys.add((q - k, qp - k))
                    k += 1
        return cls(H, kappa, space, sorted(keys))

    def view(self, y: np.ndarray, key) -> np.ndarray:
        off = self.offsets[key]
        shape = self.shapes[key]
        return y[off:off + shape[0] * shape[1]].reshape(shape)

    def pack(self, rho: BlockDensity) -> np.ndarray:
        y = np.zeros(self.size, dtype=complex)
        for key in self.keys:
            block = rho.blocks.get(key)
            if block is not None:
                self.view(y, key)[...] = block
        return y

    def unpack(self, y: np.ndarray) -> BlockDensity:
        blocks = {}
        for key in self.keys:
            block = self.view(y, key).copy()
            blocks[key] = block
            if key[0] != key[1]:
                blocks[(key[1], key[0])] = block.conj().T.copy()
        return BlockDensity(self.space, blocks)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        out = np.empty_like(y)
        kappa = self.kappa
        for key in self.keys:
            q, qp = key
            rho = self.view(y, key)
            d = self.view(out, key)
            x = self.K[q] @ rho
            if q == qp:
                # rho K^+ = (K rho)^+ for Hermitian diagonal blocks
                np.add(x, x.conj().T, out=d)
            else:
                np.add(x, rho @ self.Kh[qp], out=d)
            src = self.sources.get(key)
            if src is not None:
                fed = self.A[q] @ self.view(y, src)
                d += kappa * (fed @ self.Adag[qp])
        return out

    def trace(self, y: np.ndarray) -> complex:
        return complex(sum(np.trace(self.view(y, k)) for k in self.keys if k[0] == k[1]))

    def hermitize(self, y: np.ndarray) -> None:
        for k in self.keys:
            if k[0] == k[1]:
                v = self.view(y, k)
                v[...] = 0.5 * (v + v.conj().T)

    def max_rate(self) -> float:
        """Bound on the generator's spectral radius for the stability cap."""
        sectors = {q for k in self.keys for q in k}
        h = max(_block_radius(self.H[q]) for q in sectors)
        cav = max(float(np.max(self.n[q])) for q in sectors)
        return 2 * h + self.kappa * cav


def _as_block_density(rho0, space: CompositeSpace) -> BlockDensity:
    rho = BlockDensity.from_state(space, rho0)
    tr = rho.trace()
    if abs(tr - 1) > 1e-6:
        raise InvalidArgument(f"initial state has trace {tr}")
    for (q, qp), block in rho.blocks.items():
        mirror = rho.blocks.get((qp, q))
        if mirror is None or np.max(np.abs(block - mirror.conj().T)) > 1e-9:
            raise InvalidArgument("initial density matrix is not Hermitian")
    return rho


def evolve_me(H: sp.spmatrix, kappa: float, rho0, config: EvolutionConfig, *,
              space: CompositeSpace, target: Optional[tuple[float, float]] = None,
              max_jumps: Optional[int] = None, check_positivity: bool = False,
              stability_cap: bool = True, provenance: Optional[dict] = None) -> TimeSeries:
    """Integrate the master equation and record observables on the output grid.

    ``rho0`` may be a state vector, a dense density matrix or a BlockDensity.
    ``max_jumps`` drops charge sectors more than that many photon losses
    below the initial ones; the trace check then certifies the truncation.
    With ``stability_cap`` the step is reduced, never enlarged, to keep RK4
    stable for the truncated spectrum.
    """
    if kappa < 0:
        raise InvalidArgument(f"kappa must be >= 0, got {kappa}")
    if H.shape != (space.dim, space.dim):
        raise InvalidArgument(f"H has shape {H.shape}, space dim is {space.dim}")
    rho = _as_block_density(rho0, space)
    gen = BlockLiouvillian.for_state(H, kappa, space, rho, max_jumps)
    if stability_cap:
        config = config.capped(RK4_STABILITY_MARGIN / gen.max_rate())
    y = gen.pack(rho)
    times = config.times
    h = config.dt
    records = [record(gen.unpack(y), 0.0, space=space, target=target)]
    for i in range(1, len(times)):
        for _ in range(config.substeps):
            y = rk4_step(gen, y, h)
        t = times[i]
        if not np.all(np.isfinite(y)):
            raise NumericalFailure(f"non-finite density matrix at t = {t}")
        tr = gen.trace(y)
        if abs(tr - 1) > TRACE_TOLERANCE:
            raise StepSizeTooLarge(
                f"trace drifted to {tr.real:.9f} at t = {t:.6g}; reduce dt"
                + (" or raise max_jumps" if max_jumps is not None else ""), time=t)
        gen.hermitize(y)
        state = gen.unpack(y)
        if check_positivity:
            lam = state.min_eigenvalue()
            if lam < -1e-6:
                raise NumericalFailure(f"density matrix lost positivity (eigenvalue {lam}) at t = {t}")
        records.append(record(state, t, space=space, target=target))
    payload = {"H": params_hash({"data": H.tocsr().data.tobytes().hex(),
                                 "indices": H.tocsr().indices.tobytes().hex()}),
               "kappa": kappa, "config": config.as_dict(), "cutoffs": space.cutoffs,
               "max_jumps": max_jumps}
    meta = {"cutoffs": space.cutoffs, "dt": config.dt, "blocks": len(gen.keys)}
    if provenance:
        meta.update(provenance)
    return TimeSeries(times, records, "master", params_hash(payload), meta=meta,
                      final_state=gen.unpack(y))


@dataclass
class ConvergenceReport:
    observable: str
    tol: float
    cutoffs: list[tuple[int, int, int]] = field(default_factory=list)
    dts: list[float] = field(default_factory=list)
    deltas: list[float] = field(default_factory=list)
    converged: bool = False


def converge(build_h: Callable[[CompositeSpace], sp.spmatrix], kappa: float,
             build_rho0: Callable[[CompositeSpace], object], config: EvolutionConfig,
             cutoffs, observable: str = "zeta12", tol: float = 1e-4,
             max_doublings: int = 4, **evolve_kw) -> tuple[TimeSeries, ConvergenceReport]:
    """Double every cutoff (halving dt on the first refinement) until the
    named observable changes by at most ``tol`` on the whole grid.

    Returns the most refined series and the report.
    """
    if not tol > 0:
        raise ConvergenceFailure(f"tolerance must be positive, got {tol}", report=None)
    report = ConvergenceReport(observable, tol)
    cut = tuple(int(c) for c in cutoffs)

    def run(cut, cfg):
        space = CompositeSpace(cut)
        ts = evolve_me(build_h(space), kappa, build_rho0(space), cfg, space=space, **evolve_kw)
        report.cutoffs.append(cut)
        report.dts.append(ts.meta["dt"])
        return ts

    previous = run(cut, config)
    cfg = config
    for level in range(max_doublings):
        cut = tuple(2 * c for c in cut)
        if level == 0:
            cfg = EvolutionConfig(config.t_max, config.n_outputs, snap_dt(config.dt / 2, config.spacing))
        current = run(cut, cfg)
        delta = max_abs_difference(previous, current, observable)
        report.deltas.append(delta)
        if delta <= tol:
            report.converged = True
            current.meta["convergence"] = report
            return current, report
        previous = current
    raise ConvergenceFailure(
        f"{observable} not converged to {tol} after {max_doublings} doublings "
        f"(last delta {report.deltas[-1]:.3g})", last_delta=report.deltas[-1], report=report)
