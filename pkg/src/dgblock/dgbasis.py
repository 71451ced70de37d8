"""Partition of the primitive index set and blockwise SVD compression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activespace import OrbitalSet, _fix_signs
from .primitive import Geometry, Grid

RELATIVE = "relative"
ABSOLUTE = "absolute"
DEGENERACY_TOL = 1e-12


class PartitionError(ValueError):
    pass


class EmptyBlockError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    blocks: tuple  # tuple of int arrays (sorted flat indices)
    strategy: str = "custom"

    def __post_init__(self):
        blocks = tuple(np.asarray(b, dtype=int) for b in self.blocks)
        seen = set()
        for k, b in enumerate(blocks):
            if b.size == 0:
                raise PartitionError(f"block {k} is empty")
            s = set(b.tolist())
            if len(s) != b.size or seen & s:
                raise PartitionError("blocks overlap")
            seen |= s
        if seen != set(range(len(seen))):
            raise PartitionError("blocks do not cover 0..N_p-1")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def n_points(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def sizes(self) -> list[int]:
        return [int(b.size) for b in self.blocks]

    def is_contiguous(self) -> bool:
        return all(np.all(np.diff(b) == 1) for b in self.blocks)


def _slabs(grid: Grid, axis: int, bounds) -> Partition:
    """Blocks from consecutive slab index ranges [lo, hi) along ``axis``."""
    coord = grid.axis_index(axis)
    blocks = [np.flatnonzero((coord >= lo) & (coord < hi)) for lo, hi in bounds]
    return Partition(tuple(blocks))


def partition_uniform(grid: Grid, n_blocks: int, axis: int | None = None) -> Partition:
    """Contiguous slabs; the remainder goes to the leading blocks."""
    axis = grid.dim - 1 if axis is None else axis
    n = grid.extents[axis]
    if n_blocks < 1 or n_blocks > n:
        raise PartitionError(f"cannot split {n} planes into {n_blocks} blocks")
    base, rem = divmod(n, n_blocks)
    sizes = [base + (1 if k < rem else 0) for k in range(n_blocks)]
    edges = np.concatenate([[0], np.cumsum(sizes)])
    part = _slabs(grid, axis, zip(edges[:-1], edges[1:]))
    return Partition(part.blocks, "uniform")


def chain_axis(geometry: Geometry) -> int:
    if geometry.dim == 1:
        return 0
    spread = np.ptp(geometry.positions, axis=0)
    return int(np.argmax(spread))


def partition_atom_centered(grid: Grid, geometry: Geometry, axis: int | None = None) -> Partition:
    """One slab per atom; boundaries at inter-atomic midpoints snapped to planes.

    Planes on a boundary belong to the left block; midpoints halfway
    between two planes snap to the lower one.
    """
    axis = chain_axis(geometry) if axis is None else axis
    x = geometry.positions[:, axis]
    if np.any(np.diff(x) < 0):
        raise PartitionError("atoms must be sorted along the chain axis")
    h = grid.spacing[axis]
    if np.any(np.diff(x) < h - 1e-12):
        raise PartitionError("unresolvable partition: atoms closer than one grid spacing")
    origin = grid.origin[axis]
    n = grid.extents[axis]
    mids = 0.5 * (x[:-1] + x[1:])
    # plane index of each boundary (inclusive on the left)
    t = (mids - origin) / h
    cut = np.ceil(t - 0.5 - 1e-9).astype(int)
    edges = np.concatenate([[0], cut + 1, [n]])
    if np.any(np.diff(edges) <= 0):
        raise PartitionError("unresolvable partition: empty block after snapping")
    part = _slabs(grid, axis, zip(edges[:-1], edges[1:]))
    return Partition(part.blocks, "atom-centered")


@dataclass
class DGBasis:
    partition: Partition
    U_blocks: list
    singular_values: list  # kept spectra, descending
    discarded_values: list
    tau: float
    mode: str

    @property
    def n_kappa(self) -> list[int]:
        return [u.shape[1] for u in self.U_blocks]

    @property
    def n_functions(self) -> int:
        return sum(self.n_kappa)

    @property
    def n_blocks(self) -> int:
        return self.partition.n_blocks

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.n_kappa)]).astype(int)

    @property
    def mean_n_kappa(self) -> float:
        return float(np.mean(self.n_kappa))


def _keep_count(sigma: np.ndarray, cutoff: float, floor: float) -> int:
    keep = int(np.sum(sigma >= cutoff))
    # extend across a degenerate group straddling the cutoff
    while 0 < keep < sigma.size and sigma[keep - 1] - sigma[keep] <= DEGENERACY_TOL:
        keep += 1
    return min(keep, int(np.sum(sigma > floor)))


def compress(orbitals: OrbitalSet | np.ndarray, partition: Partition, tau: float,
             mode: str = RELATIVE, n_min: int = 1, n_max: int | None = None) -> DGBasis:
    """Blockwise truncated SVD of the active orbital matrix.

    Keeps sigma_j >= tau * sigma_max (``relative``, global maximum over all
    blocks) or sigma_j >= tau (``absolute``), then clamps to [n_min, n_max].
    Singular values below a numerical-rank floor are never kept.
    """
    phi = orbitals.phi if isinstance(orbitals, OrbitalSet) else np.asarray(orbitals)
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if mode not in (RELATIVE, ABSOLUTE):
        raise ValueError(f"unknown truncation mode {mode!r}")
    if phi.shape[0] != partition.n_points:
        raise ValueError("orbital rows do not match the partition")
    svds = []
    for block in partition.blocks:
        u, s, _ = np.linalg.svd(phi[block], full_matrices=False)
        svds.append((u, s))
    sigma_max = max((s[0] for _, s in svds if s.size), default=0.0)
    cutoff = tau * sigma_max if mode == RELATIVE else tau
    eps = np.finfo(float).eps
    U, S, D = [], [], []
    for k, (block, (u, s)) in enumerate(zip(partition.blocks, svds)):
        floor = max(phi.shape) * eps * sigma_max
        keep = _keep_count(s, cutoff, floor)
        if n_max is not None:
            keep = min(keep, n_max)
        if keep < n_min:
            if not s.size or s[0] <= floor:
                if n_min >= 1:
                    raise EmptyBlockError(f"empty block content in block {k}; repartition")
            keep = min(n_min, s.size)
        U.append(_fix_signs(u[:, :keep]))
        S.append(s[:keep].copy())
        D.append(s[keep:].copy())
    return DGBasis(partition, U, S, D, float(tau), mode)


def dg_block_diagonal_matrix(dg: DGBasis) -> np.ndarray:
    """The N_p x N_d matrix diag[U_1, ..., U_Nb] with rows in grid order."""
    out = np.zeros((dg.partition.n_points, dg.n_functions))
    off = dg.offsets
    for k, (block, u) in enumerate(zip(dg.partition.blocks, dg.U_blocks)):
        out[np.ix_(block, np.arange(off[k], off[k + 1]))] = u
    return out


def projection_residual(dg: DGBasis, phi: np.ndarray) -> float:
    """Squared Frobenius norm of (I - P_DG) phi."""
    total = 0.0
    for block, u in zip(dg.partition.blocks, dg.U_blocks):
        blk = phi[block]
        r = blk - u @ (u.T @ blk)
        total += float(np.sum(r * r))
    return total


def discarded_weight(dg: DGBasis) -> float:
    return float(sum(np.sum(d * d) for d in dg.discarded_values))
