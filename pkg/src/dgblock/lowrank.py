"""Double factorization of block-pair interactions.

For a pair (k, k') the interaction is embedded in the union of the two
blocks' orbitals (k first) and matricized with rows (p, s) and columns
(q, r) of v[p, q, r, s]. The embedded matrix holds the k-k, k-k' and k'-k'
pair tensors, which is the smallest set for which it is positive
semidefinite. A pivoted Cholesky gives outer factors g^l (symmetric on the
union space); each is then eigendecomposed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blockham import BlockTwoBody

PSD_FLOOR = -1e-10
PSD_ERROR = -1e-8


class NotPSDError(ValueError):
    pass


@dataclass
class BlockPairFactors:
    pair: tuple
    n_union: int
    outer_factors: list  # symmetric n_union x n_union matrices g^l
    inner_vectors: list  # per l, n_union x rho_l orthonormal columns
    inner_values: list  # per l, kept eigenvalues
    residual_trace: float
    min_eigenvalue: float = 0.0
    sizes: tuple = field(default=())

    @property
    def outer_rank(self) -> int:
        return len(self.outer_factors)

    @property
    def inner_ranks(self) -> list[int]:
        return [int(w.size) for w in self.inner_values]

    @property
    def depth(self) -> int:
        return int(sum(self.inner_ranks))

    def reconstruct(self) -> np.ndarray:
        """Union-space matrix sum_l vec(g~l) vec(g~l)^T with truncated g~l."""
        n = self.n_union
        out = np.zeros((n * n, n * n))
        for u, w in zip(self.inner_vectors, self.inner_values):
            g = (u * w) @ u.T
            vec = g.reshape(-1)
            out += np.outer(vec, vec)
        return out


def union_tensor(v: BlockTwoBody, k: int, kp: int) -> np.ndarray:
    """Dense v[p, q, r, s] restricted to the union of blocks k and k'."""
    blocks = [k] if k == kp else [k, kp]
    sizes = [v.n_kappa[b] for b in blocks]
    off = np.concatenate([[0], np.cumsum(sizes)])
    n = int(off[-1])
    out = np.zeros((n, n, n, n))
    for a, ka in enumerate(blocks):
        for b, kb in enumerate(blocks):
            t = v.pair(ka, kb)
            sa = slice(off[a], off[a + 1])
            sb = slice(off[b], off[b + 1])
            out[sa, sb, sb, sa] = t
    return out


def matricize(tensor: np.ndarray) -> np.ndarray:
    """M[(p, s), (q, r)] = v[p, q, r, s]."""
    n = tensor.shape[0]
    return tensor.transpose(0, 3, 1, 2).reshape(n * n, n * n)


def unmatricize(mat: np.ndarray) -> np.ndarray:
    n = int(round(np.sqrt(mat.shape[0])))
    return mat.reshape(n, n, n, n).transpose(0, 2, 3, 1)


def pair_union_matricize(v: BlockTwoBody, k: int, kp: int) -> tuple[np.ndarray, float]:
    """Symmetrized union-space matrix and its smallest eigenvalue.

    Eigenvalues in [PSD_ERROR, 0) are shifted away so Cholesky sees a PSD
    matrix; anything more negative raises NotPSDError.
    """
    if k > kp:
        k, kp = kp, k
    if (k, kp) not in v.pairs:
        raise KeyError(f"no pair ({k}, {kp})")
    m = matricize(union_tensor(v, k, kp))
    m = 0.5 * (m + m.T)
    w, vecs = np.linalg.eigh(m)
    lo = float(w[0])
    if lo < PSD_ERROR:
        raise NotPSDError(f"matricization not PSD (min eigenvalue {lo:.3e})")
    if lo < 0:
        w = np.maximum(w, 0.0)
        m = (vecs * w) @ vecs.T
        m = 0.5 * (m + m.T)
    return m, lo


def pivoted_cholesky(mat: np.ndarray, tol: float) -> tuple[np.ndarray, float]:
    """Columns L with mat ~ L L^T; stops when the residual trace <= tol.

    Pivot is the largest remaining diagonal, lowest index on ties.
    """
    if tol < 0:
        raise ValueError("outer tolerance must be non-negative")
    n = mat.shape[0]
    d = np.diag(mat).astype(float).copy()
    cols = []
    scale = max(float(np.max(np.abs(d))) if n else 0.0, 1e-300)
    while len(cols) < n:
        resid = float(np.sum(np.maximum(d, 0.0)))
        if resid <= tol:
            break
        p = int(np.argmax(d))
        if d[p] <= 1e-14 * scale:
            break
        col = mat[:, p].astype(float).copy()
        for c in cols:
            col -= c * c[p]
        col /= np.sqrt(d[p])
        cols.append(col)
        d -= col * col
        d[p] = 0.0
    lmat = np.stack(cols, axis=1) if cols else np.zeros((n, 0))
    return lmat, float(np.sum(np.maximum(d, 0.0)))


def double_factorize(mat: np.ndarray, outer_tol: float, inner_tol: float,
                     pair: tuple = (0, 0), min_eigenvalue: float = 0.0) -> BlockPairFactors:
    if outer_tol < 0 or inner_tol < 0:
        raise ValueError("tolerances must be non-negative")
    n = int(round(np.sqrt(mat.shape[0])))
    if n * n != mat.shape[0]:
        raise ValueError("matrix side must be a perfect square")
    lmat, resid = pivoted_cholesky(mat, outer_tol)
    outer, vecs, vals = [], [], []
    for col in lmat.T:
        g = col.reshape(n, n)
        g = 0.5 * (g + g.T)
        w, u = np.linalg.eigh(g)
        keep = np.abs(w) > inner_tol
        outer.append(g)
        vecs.append(u[:, keep])
        vals.append(w[keep])
    return BlockPairFactors(tuple(pair), n, outer, vecs, vals, resid, min_eigenvalue)


def factorize_pair(v: BlockTwoBody, k: int, kp: int, outer_tol: float = 1e-8,
                   inner_tol: float = 1e-12) -> BlockPairFactors:
    m, lo = pair_union_matricize(v, k, kp)
    f = double_factorize(m, outer_tol, inner_tol, (k, kp), lo)
    f.sizes = (v.n_kappa[k],) if k == kp else (v.n_kappa[k], v.n_kappa[kp])
    return f


def factorize_all(v: BlockTwoBody, outer_tol: float = 1e-8, inner_tol: float = 1e-12) -> list:
    return [factorize_pair(v, k, kp, outer_tol, inner_tol) for (k, kp) in sorted(v.pairs)]


def pair_reconstruction_error(v: BlockTwoBody, f: BlockPairFactors) -> float:
    """Frobenius error of the stored (k, k') tensor after reconstruction."""
    k, kp = f.pair
    full = unmatricize(f.reconstruct())
    nk = v.n_kappa[k]
    if k == kp:
        approx = full
    else:
        approx = full[:nk, nk:, nk:, :nk]
    return float(np.linalg.norm(approx - v.pairs[(k, kp)]))


def trotter_depth_estimate(factors: list, n_blocks: int | None = None) -> tuple[dict, int]:
    """Per-pair depth sum_l rho_l and the layered total max_depth * N_b."""
    per_pair = {f.pair: f.depth for f in factors}
    if n_blocks is None:
        n_blocks = 1 + max((max(p) for p in per_pair), default=-1)
    total = max(per_pair.values(), default=0) * n_blocks
    return per_pair, int(total)
