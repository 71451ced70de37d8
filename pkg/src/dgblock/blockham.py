"""Primitive Hamiltonian transformed into the DG basis.

The two-body tensor is stored only for block pairs (k, k') with k <= k'.
Each pair tensor has index order (i, i', j', j), matching the operator
c+_{k,i} c+_{k',i'} c_{k',j'} c_{k,j}; every other entry of the full
tensor is zero by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dgbasis import DGBasis, dg_block_diagonal_matrix
from .primitive import PrimitiveSystem


@dataclass
class BlockOneBody:
    h_d: np.ndarray


@dataclass
class BlockTwoBody:
    pairs: dict  # (k, k') with k <= k' -> array (n_k, n_k', n_k', n_k)
    n_kappa: list

    @property
    def n_blocks(self) -> int:
        return len(self.n_kappa)

    @property
    def n_functions(self) -> int:
        return int(sum(self.n_kappa))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.n_kappa)]).astype(int)

    def pair(self, k: int, kp: int) -> np.ndarray:
        """Pair tensor for any ordered pair; k > k' uses the relabeling symmetry."""
        if k <= kp:
            return self.pairs[(k, kp)]
        return self.pairs[(kp, k)].transpose(1, 0, 3, 2)

    def ordered_pairs(self):
        for k in range(self.n_blocks):
            for kp in range(self.n_blocks):
                yield k, kp

    @property
    def stored_entries(self) -> int:
        return int(sum(t.size for t in self.pairs.values()))

    @property
    def expanded_entries(self) -> int:
        """Entries of the full tensor that the block structure can hold."""
        n2 = np.square(self.n_kappa)
        return int(np.sum(n2) ** 2)


def _check(system: PrimitiveSystem, dg: DGBasis):
    if dg.partition.n_points != system.n_points:
        raise ValueError("DG basis and primitive system use different grids")


def transform_onebody(system: PrimitiveSystem, dg: DGBasis) -> BlockOneBody:
    _check(system, dg)
    u = dg_block_diagonal_matrix(dg)
    h = u.T @ system.one_body @ u
    return BlockOneBody(0.5 * (h + h.T))


def _pair_densities(u: np.ndarray) -> np.ndarray:
    n = u.shape[1]
    return (u[:, :, None] * u[:, None, :]).reshape(u.shape[0], n * n)


def transform_twobody(system: PrimitiveSystem, dg: DGBasis) -> BlockTwoBody:
    _check(system, dg)
    blocks = dg.partition.blocks
    rho = [_pair_densities(u) for u in dg.U_blocks]
    n = dg.n_kappa
    pairs = {}
    for k in range(dg.n_blocks):
        for kp in range(k, dg.n_blocks):
            vblk = system.v_p[np.ix_(blocks[k], blocks[kp])]
            chem = rho[k].T @ vblk @ rho[kp]  # [(i, j), (i', j')]
            t = chem.reshape(n[k], n[k], n[kp], n[kp]).transpose(0, 2, 3, 1)
            if k == kp:
                # exact relabeling symmetry within a block
                t = 0.5 * (t + t.transpose(1, 0, 3, 2))
            pairs[(k, kp)] = np.ascontiguousarray(t)
    return BlockTwoBody(pairs, list(n))


@dataclass
class SparseTensor4:
    """Coordinate-format 4-index tensor."""

    shape: tuple
    coords: np.ndarray  # (nnz, 4) int
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def todense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[tuple(self.coords.T)] = self.values
        return out


def expand_to_full(v: BlockTwoBody, cutoff: float = 0.0) -> SparseTensor4:
    """Explicit full-index tensor; entries with |value| <= cutoff are dropped
    (nothing is dropped at cutoff 0 except exact zeros are kept)."""
    off = v.offsets
    coords, values = [], []
    for k, kp in v.ordered_pairs():
        t = v.pair(k, kp)
        i, ip, jp, j = np.meshgrid(*(np.arange(s) for s in t.shape), indexing="ij")
        c = np.stack([i + off[k], ip + off[kp], jp + off[kp], j + off[k]], axis=-1).reshape(-1, 4)
        vals = t.reshape(-1)
        if cutoff > 0:
            mask = np.abs(vals) > cutoff
            c, vals = c[mask], vals[mask]
        coords.append(c)
        values.append(vals)
    n = v.n_functions
    if coords:
        coords = np.concatenate(coords)
        values = np.concatenate(values)
    else:
        coords = np.zeros((0, 4), dtype=int)
        values = np.zeros(0)
    return SparseTensor4((n, n, n, n), coords, values)


def extract_blocks(full: SparseTensor4 | np.ndarray, n_kappa) -> BlockTwoBody:
    """Inverse of expand_to_full for k <= k' pairs."""
    dense = full.todense() if isinstance(full, SparseTensor4) else np.asarray(full)
    off = np.concatenate([[0], np.cumsum(n_kappa)]).astype(int)
    pairs = {}
    nb = len(n_kappa)
    for k in range(nb):
        a = slice(off[k], off[k + 1])
        for kp in range(k, nb):
            b = slice(off[kp], off[kp + 1])
            pairs[(k, kp)] = dense[a, b, b, a].copy()
    return BlockTwoBody(pairs, list(n_kappa))


def dense_twobody(v: BlockTwoBody) -> np.ndarray:
    return expand_to_full(v).todense()


@dataclass
class DGHamiltonian:
    one_body: BlockOneBody
    two_body: BlockTwoBody
    core_energy: float

    @property
    def n_functions(self) -> int:
        return self.two_body.n_functions


def build_dg_hamiltonian(system: PrimitiveSystem, dg: DGBasis) -> DGHamiltonian:
    return DGHamiltonian(transform_onebody(system, dg), transform_twobody(system, dg),
                         system.nuclear_repulsion)


def pair_nonzero_counts(v: BlockTwoBody, cutoff: float = 1e-6) -> dict:
    return {f"{k},{kp}": int(np.sum(np.abs(t) > cutoff)) for (k, kp), t in v.pairs.items()}
