"""Truncated Fock-space algebra for the cavity + two collective atomic modes.

Mode order is fixed to (cavity, atoms-1, atoms-2) and the flattened basis is
row-major, i.e. the atoms-2 occupation varies fastest. Operators are
``scipy.sparse`` CSR matrices, pure states are 1-D complex arrays and density
matrices are dense 2-D complex arrays.

Because every model operator either conserves ``N = n_2 - n_1 + n_cav`` or
(for the cavity jump operator) lowers it by one, density matrices reachable
from the usual initial states are block-structured in ``(N, N')``.
:class:`BlockDensity` stores only those blocks; it is the workhorse
representation for the master-equation solver at large cutoffs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument, OutOfRange

CAVITY, ATOMS1, ATOMS2 = 0, 1, 2
MODE_NAMES = ("cavity", "atoms-1", "atoms-2")


@dataclass(frozen=True)
class CompositeSpace:
    """Three-mode truncated Fock space; ``cutoffs`` are maximum occupations."""

    cutoffs: tuple[int, int, int]

    def __post_init__(self):
        cut = tuple(int(c) for c in self.cutoffs)
        if len(cut) != 3:
            raise InvalidArgument(f"expected three cutoffs, got {len(cut)}")
        if any(c < 1 for c in cut):
            raise InvalidArgument(f"cutoffs must be >= 1, got {cut}")
        object.__setattr__(self, "cutoffs", cut)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(c + 1 for c in self.cutoffs)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, occupations: Sequence[int]) -> int:
        occ = tuple(int(n) for n in occupations)
        if len(occ) != 3:
            raise InvalidArgument("expected three occupations")
        for n, c in zip(occ, self.cutoffs):
            if n < 0 or n > c:
                raise OutOfRange(f"occupations {occ} exceed cutoffs {self.cutoffs}")
        return int(np.ravel_multi_index(occ, self.dims))

    def occupations(self, index: int) -> tuple[int, int, int]:
        if not 0 <= index < self.dim:
            raise OutOfRange(f"basis index {index} outside [0, {self.dim})")
        return tuple(int(n) for n in np.unravel_index(index, self.dims))

    @cached_property
    def occupation_table(self) -> np.ndarray:
        """(dim, 3) integer array of occupations for every basis index."""
        grids = np.indices(self.dims).reshape(3, -1)
        table = np.ascontiguousarray(grids.T)
        table.setflags(write=False)
        return table

    @cached_property
    def charge(self) -> np.ndarray:
        """Eigenvalue of the conserved ``n_2 - n_1 + n_cav`` for every basis index."""
        occ = self.occupation_table
        q = occ[:, ATOMS2] - occ[:, ATOMS1] + occ[:, CAVITY]
        q.setflags(write=False)
        return q

    @cached_property
    def sectors(self) -> dict[int, np.ndarray]:
        """Map charge value -> sorted basis indices carrying that charge."""
        q = self.charge
        order = np.argsort(q, kind="stable")
        values, starts = np.unique(q[order], return_index=True)
        bounds = list(starts[1:]) + [len(q)]
        return {int(v): order[s:e] for v, s, e in zip(values, starts, bounds)}


def make_space(cutoffs: Sequence[int]) -> CompositeSpace:
    return CompositeSpace(tuple(cutoffs))


def _check_mode(mode) -> int:
    if mode not in (0, 1, 2) or isinstance(mode, bool):
        raise InvalidArgument(f"mode must be 0, 1 or 2, got {mode!r}")
    return int(mode)


def _single_mode_lowering(cutoff: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1, format="csr")


def _embed(space: CompositeSpace, mode: int, local: sp.spmatrix) -> sp.csr_matrix:
    factors = [sp.identity(d, format="csr") for d in space.dims]
    factors[mode] = local
    op = sp.kron(sp.kron(factors[0], factors[1]), factors[2], format="csr")
    op = op.astype(complex)
    op.sum_duplicates()
    op.eliminate_zeros()
    return op


def annihilator(space: CompositeSpace, mode: int) -> sp.csr_matrix:
    mode = _check_mode(mode)
    return _embed(space, mode, _single_mode_lowering(space.cutoffs[mode]))


def creator(space: CompositeSpace, mode: int) -> sp.csr_matrix:
    return annihilator(space, mode).conj().T.tocsr()


def number_op(space: CompositeSpace, mode: int) -> sp.csr_matrix:
    mode = _check_mode(mode)
    return sp.diags(space.occupation_table[:, mode].astype(complex), 0, format="csr")


def basis_state(space: CompositeSpace, occupations: Sequence[int]) -> np.ndarray:
    psi = np.zeros(space.dim, dtype=complex)
    psi[space.index(occupations)] = 1.0
    return psi


def thermal_populations(nbar: float, cutoff: int) -> np.ndarray:
    """Truncated, renormalised Bose-Einstein populations p_0..p_cutoff."""
    if nbar < 0 or not np.isfinite(nbar):
        raise InvalidArgument(f"nbar must be a finite number >= 0, got {nbar}")
    p = np.zeros(cutoff + 1)
    if nbar == 0:
        p[0] = 1.0
        return p
    n = np.arange(cutoff + 1)
    p = (nbar / (1 + nbar)) ** n / (1 + nbar)
    return p / p.sum()


def thermal_cavity_product(space: CompositeSpace, nbar: float) -> np.ndarray:
    """Thermal cavity with mean occupation ``nbar`` times atomic vacua."""
    p = thermal_populations(nbar, space.cutoffs[CAVITY])
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    for n, pn in enumerate(p):
        i = space.index((n, 0, 0))
        rho[i, i] = pn
    return rho


def projector(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Reduce ``rho`` on a tensor product with local ``dims`` to the ``keep`` modes.

    Kept modes stay in their original relative order.
    """
    dims = tuple(int(d) for d in dims)
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise InvalidArgument("keep must name at least one mode")
    if any(k < 0 or k >= len(dims) for k in keep):
        raise InvalidArgument(f"keep {keep} out of range for {len(dims)} modes")
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise InvalidArgument(f"rho has shape {rho.shape}, expected {(total, total)}")
    n = len(dims)
    t = rho.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[i] if i not in keep else letters[n + i] for i in range(n)]
    out = [letters[i] for i in keep] + [letters[n + i] for i in keep]
    sub = "".join(row) + "".join(col) + "->" + "".join(out)
    kept_dim = int(np.prod([dims[k] for k in keep]))
    return np.einsum(sub, t).reshape(kept_dim, kept_dim)


def fidelity_pure(rho: np.ndarray, psi: np.ndarray) -> float:
    """<psi|rho|psi>, clamped to [0, 1]."""
    psi = np.asarray(psi)
    if rho.ndim != 2 or rho.shape != (psi.size, psi.size):
        raise InvalidArgument(f"dimension mismatch: rho {rho.shape}, psi {psi.shape}")
    value = np.vdot(psi, rho @ psi)
    return float(min(1.0, max(0.0, value.real)))


def purity(rho: np.ndarray) -> float:
    return float(np.einsum("ij,ji->", rho, rho).real)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = rho - sigma
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def atomic_difference_blocks(states: Sequence[np.ndarray], weights: Sequence[float],
                             space: CompositeSpace) -> dict[int, np.ndarray]:
    """Reduced atomic state of ``sum_k weights[k] |states[k]><states[k]|``.

    Each state must lie in a single charge sector. Tracing out the cavity then
    leaves an atomic operator that is block diagonal in ``d = n_2 - n_1``; the
    block for ``d`` is indexed by ``n_1`` (length cutoff_1 + 1, unused entries
    zero). Large cutoffs stay cheap because no full atomic matrix is formed.
    """
    if len(states) != len(weights):
        raise InvalidArgument("states and weights differ in length")
    occ = space.occupation_table
    d1 = space.cutoffs[ATOMS1] + 1
    diff = occ[:, ATOMS2] - occ[:, ATOMS1]
    blocks: dict[int, np.ndarray] = {}
    for psi, w in zip(states, weights):
        psi = np.asarray(psi)
        if psi.shape != (space.dim,):
            raise InvalidArgument(f"state has shape {psi.shape}, expected ({space.dim},)")
        support = np.nonzero(psi)[0]
        if support.size and np.unique(space.charge[support]).size > 1:
            raise InvalidArgument("state spans several charge sectors")
        for k in np.unique(occ[support, CAVITY]):
            sel = support[occ[support, CAVITY] == k]
            d = int(diff[sel[0]])
            v = np.zeros(d1, dtype=complex)
            v[occ[sel, ATOMS1]] = psi[sel]
            block = blocks.setdefault(d, np.zeros((d1, d1), dtype=complex))
            block += w * np.outer(v, v.conj())
    return blocks


def block_trace_distance(a: dict[int, np.ndarray], b: dict[int, np.ndarray]) -> float:
    """Trace distance between two operators given as matching diagonal blocks."""
    total = 0.0
    for key in set(a) | set(b):
        x = a.get(key)
        y = b.get(key)
        diff = x if y is None else (-y if x is None else x - y)
        diff = 0.5 * (diff + diff.conj().T)
        total += np.abs(np.linalg.eigvalsh(diff)).sum()
    return float(0.5 * total)


@dataclass
class BlockDensity:
    """Density matrix stored as charge blocks ``(N, N') -> rho[idx_N][:, idx_N']``.

    Blocks absent from ``blocks`` are identically zero.
    """

    space: CompositeSpace
    blocks: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_dense(cls, space: CompositeSpace, rho: np.ndarray) -> "BlockDensity":
        if rho.shape != (space.dim, space.dim):
            raise InvalidArgument(f"rho has shape {rho.shape}, space dim is {space.dim}")
        sectors = space.sectors
        blocks = {}
        for q, rows in sectors.items():
            sub_rows = rho[rows]
            for qp, cols in sectors.items():
                block = sub_rows[:, cols]
                if np.any(block):
                    blocks[(q, qp)] = np.array(block, dtype=complex)
        return cls(space, blocks)

    @classmethod
    def from_pure(cls, space: CompositeSpace, psi: np.ndarray) -> "BlockDensity":
        psi = np.asarray(psi, dtype=complex)
        if psi.shape != (space.dim,):
            raise InvalidArgument(f"psi has shape {psi.shape}, space dim is {space.dim}")
        parts = {q: psi[idx] for q, idx in space.sectors.items() if np.any(psi[idx])}
        blocks = {(q, qp): np.outer(v, w.conj()) for q, v in parts.items() for qp, w in parts.items()}
        return cls(space, blocks)

    @classmethod
    def from_state(cls, space: CompositeSpace, state) -> "BlockDensity":
        if isinstance(state, BlockDensity):
            return state.copy()
        state = np.asarray(state)
        if state.ndim == 1:
            return cls.from_pure(space, state)
        return cls.from_dense(space, state)

    @classmethod
    def thermal_cavity(cls, space: CompositeSpace, nbar: float) -> "BlockDensity":
        """Thermal cavity with mean occupation ``nbar`` times atomic vacua."""
        blocks = {}
        for n, pn in enumerate(thermal_populations(nbar, space.cutoffs[CAVITY])):
            idx = space.sectors[n]
            block = np.zeros((len(idx), len(idx)), dtype=complex)
            j = int(np.searchsorted(idx, space.index((n, 0, 0))))
            block[j, j] = pn
            blocks[(n, n)] = block
        return cls(space, blocks)

    def copy(self) -> "BlockDensity":
        return BlockDensity(self.space, {k: v.copy() for k, v in self.blocks.items()})

    def to_dense(self) -> np.ndarray:
        sectors = self.space.sectors
        rho = np.zeros((self.space.dim, self.space.dim), dtype=complex)
        for (q, qp), block in self.blocks.items():
            rho[np.ix_(sectors[q], sectors[qp])] = block
        return rho

    def trace(self) -> complex:
        return complex(sum(np.trace(b) for (q, qp), b in self.blocks.items() if q == qp))

    def populations(self) -> np.ndarray:
        """Diagonal of rho in the full basis (real part)."""
        p = np.zeros(self.space.dim)
        sectors = self.space.sectors
        for (q, qp), block in self.blocks.items():
            if q == qp:
                p[sectors[q]] = np.diagonal(block).real
        return p

    def purity(self) -> float:
        total = 0.0
        for (q, qp), block in self.blocks.items():
            partner = self.blocks.get((qp, q))
            if partner is not None:
                total += np.einsum("ij,ji->", block, partner).real
        return float(total)

    def hermitize(self) -> None:
        """Replace rho by (rho + rho^dagger)/2 in place."""
        done = set()
        for key in list(self.blocks):
            if key in done:
                continue
            q, qp = key
            mirror = (qp, q)
            a = self.blocks[key]
            b = self.blocks.get(mirror)
            if b is None:
                b = np.zeros_like(a.T)
                self.blocks[mirror] = b
            if key == mirror:
                self.blocks[key] = 0.5 * (a + a.conj().T)
            else:
                avg = 0.5 * (a + b.conj().T)
                self.blocks[key] = avg
                self.blocks[mirror] = avg.conj().T.copy()
            done.update((key, mirror))

    def min_eigenvalue(self) -> float:
        rho = self.to_dense()
        return float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])

    def reduced_atoms(self) -> np.ndarray:
        """Partial trace over the cavity, returned on the (atoms-1, atoms-2) space."""
        space = self.space
        d1, d2 = space.dims[1], space.dims[2]
        out = np.zeros((d1 * d2, d1 * d2), dtype=complex)
        occ = space.occupation_table
        sectors = space.sectors
        for (q, qp), block in self.blocks.items():
            rows, cols = sectors[q], sectors[qp]
            kr, kc = occ[rows, CAVITY], occ[cols, CAVITY]
            ar = occ[rows, ATOMS1] * d2 + occ[rows, ATOMS2]
            ac = occ[cols, ATOMS1] * d2 + occ[cols, ATOMS2]
            i, j = np.nonzero(kr[:, None] == kc[None, :])
            if i.size:
                np.add.at(out, (ar[i], ac[j]), block[i, j])
        return out

    def pair_overlap(self, amplitudes: np.ndarray) -> float:
        """<phi|tr_cav(rho)|phi> for phi = sum_n amplitudes[n] |n>_1 |n>_2."""
        space = self.space
        occ = space.occupation_table
        sectors = space.sectors
        total = 0.0
        nmax = min(space.cutoffs[1], space.cutoffs[2], len(amplitudes) - 1)
        for k in range(space.cutoffs[CAVITY] + 1):
            block = self.blocks.get((k, k))
            if block is None:
                continue
            idx = sectors[k]
            sel = np.nonzero((occ[idx, CAVITY] == k) & (occ[idx, ATOMS1] == occ[idx, ATOMS2])
                             & (occ[idx, ATOMS1] <= nmax))[0]
            phi = amplitudes[occ[idx[sel], ATOMS1]]
            total += np.vdot(phi, block[np.ix_(sel, sel)] @ phi).real
        return float(total)
