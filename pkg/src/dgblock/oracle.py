"""Brute-force references: full CI over occupation-number states and
explicit Fock-space matrices for the fermionic swap.

Mode ordering is Jordan-Wigner with spin innermost: spatial orbital p and
spin s (0 up, 1 down) map to mode 2 p + s. Two-body coefficients multiply
a+_p a+_q a_r a_s.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

MAX_MODES = 14
MAX_SECTOR_MODES = 24


class OracleSizeError(ValueError):
    pass


class EmptySectorError(ValueError):
    pass


def spin_orbital_integrals(h: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Spatial (h, v) to spin-orbital form; v[p,q,r,s] pairs spins (p,s), (q,r)."""
    n = h.shape[0]
    m = 2 * n
    h1 = np.zeros((m, m))
    v2 = np.zeros((m, m, m, m))
    for s in range(2):
        h1[s::2, s::2] = h
        for t in range(2):
            v2[s::2, t::2, t::2, s::2] = v
    return h1, v2


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    c = np.zeros_like(x)
    while np.any(x):
        c += x & 1
        x >>= 1
    return c


def _annihilate(states, signs, mode):
    occ = (states >> mode) & 1
    keep = occ == 1
    s = states[keep]
    parity = _popcount(s & ((1 << mode) - 1)) & 1
    return s ^ (1 << mode), signs[keep] * (1 - 2 * parity), keep


def _create(states, signs, mode):
    occ = (states >> mode) & 1
    keep = occ == 0
    s = states[keep]
    parity = _popcount(s & ((1 << mode) - 1)) & 1
    return s | (1 << mode), signs[keep] * (1 - 2 * parity), keep


def sector_states(n_modes: int, n_electrons: int | None = None,
                  n_alpha: int | None = None, n_beta: int | None = None) -> np.ndarray:
    """Sorted occupation bitstrings, optionally restricted by N or (N_up, N_down)."""
    if n_electrons is None and n_alpha is None:
        return np.arange(1 << n_modes, dtype=np.int64)
    if n_alpha is not None:
        n_beta = 0 if n_beta is None else n_beta
        up = range(0, n_modes, 2)
        dn = range(1, n_modes, 2)
        out = []
        for a in combinations(up, n_alpha):
            for b in combinations(dn, n_beta):
                out.append(sum(1 << m for m in a + b))
        return np.array(sorted(out), dtype=np.int64)
    out = [sum(1 << m for m in c) for c in combinations(range(n_modes), n_electrons)]
    return np.array(sorted(out), dtype=np.int64)


@dataclass
class FockMatrix:
    matrix: sp.csr_matrix
    states: np.ndarray  # occupation bitstring of each row
    n_modes: int
    core: float

    def particle_numbers(self) -> np.ndarray:
        return _popcount(self.states)


def build_hamiltonian_matrix(h: np.ndarray, v: np.ndarray, core: float = 0.0,
                             n_electrons: int | None = None, n_alpha: int | None = None,
                             n_beta: int | None = None, tol: float = 0.0) -> FockMatrix:
    """H = core + sum h_pq a+_p a_q + 1/2 sum v_pqrs a+_p a+_q a_r a_s over modes.

    The full Fock space is limited to MAX_MODES; a fixed-N sector may use up
    to MAX_SECTOR_MODES.
    """
    n = h.shape[0]
    restricted = n_electrons is not None or n_alpha is not None
    if n > (MAX_SECTOR_MODES if restricted else MAX_MODES):
        raise OracleSizeError(f"{n} modes exceed the oracle limit")
    if v.shape != (n, n, n, n):
        raise ValueError("two-body tensor shape does not match one-body")
    states = sector_states(n, n_electrons, n_alpha, n_beta)
    dim = states.size
    cols0 = np.arange(dim)
    rows, cols, vals = [np.arange(dim)], [cols0], [np.full(dim, float(core))]

    def emit(new_states, idx, coeffs):
        pos = np.searchsorted(states, new_states)
        ok = (pos < dim) & (states[np.minimum(pos, dim - 1)] == new_states)
        rows.append(pos[ok])
        cols.append(idx[ok])
        vals.append(coeffs[ok])

    ones = np.ones(dim)
    for q in range(n):
        s1, g1, k1 = _annihilate(states, ones, q)
        i1 = cols0[k1]
        for p in range(n):
            if abs(h[p, q]) <= tol:
                continue
            s2, g2, k2 = _create(s1, g1, p)
            emit(s2, i1[k2], h[p, q] * g2)
    for s in range(n):
        s1, g1, k1 = _annihilate(states, ones, s)
        i1 = cols0[k1]
        for r in range(n):
            if r == s:
                continue
            s2, g2, k2 = _annihilate(s1, g1, r)
            i2 = i1[k2]
            for q in range(n):
                s3, g3, k3 = _create(s2, g2, q)
                i3 = i2[k3]
                for p in range(n):
                    c = v[p, q, r, s]
                    if p == q or abs(c) <= tol:
                        continue
                    s4, g4, k4 = _create(s3, g3, p)
                    emit(s4, i3[k4], 0.5 * c * g4)
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(dim, dim)).tocsr()
    mat.sum_duplicates()
    return FockMatrix(mat, states, n, float(core))


def ground_energy(fock: FockMatrix, n_electrons: int | None = None) -> float:
    """Lowest eigenvalue within a fixed particle-number sector."""
    mask = np.ones(fock.states.size, dtype=bool)
    if n_electrons is not None:
        mask = fock.particle_numbers() == n_electrons
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise EmptySectorError(f"no states with {n_electrons} electrons")
    sub = fock.matrix[idx][:, idx]
    if idx.size <= 2000:
        w = np.linalg.eigvalsh(sub.toarray())
        return float(w[0])
    w = eigsh(sub, k=1, which="SA", tol=1e-12, v0=np.ones(idx.size))[0]
    return float(w[0])


def fci_energy(h: np.ndarray, v: np.ndarray, core: float, n_alpha: int, n_beta: int) -> float:
    """FCI ground energy from spatial integrals in the (N_up, N_down) sector."""
    h1, v2 = spin_orbital_integrals(h, v)
    fock = build_hamiltonian_matrix(h1, v2, core, n_alpha=n_alpha, n_beta=n_beta)
    return ground_energy(fock)


# -- independent determinant CI (Slater-Condon rules) -------------------------

def _sign_between(occ: list, a: int, b: int) -> int:
    lo, hi = min(a, b), max(a, b)
    return -1 if sum(1 for o in occ if lo < o < hi) % 2 else 1


def slater_condon_matrix(h: np.ndarray, v: np.ndarray, core: float,
                         dets: list[tuple]) -> np.ndarray:
    """Dense CI matrix over determinants given as sorted occupied-mode tuples."""
    # <pq|rs> in physicist order for a+_p a+_q a_s a_r
    g = v.transpose(0, 1, 3, 2)
    anti = g - g.transpose(0, 1, 3, 2)
    m = len(dets)
    out = np.zeros((m, m))
    sets = [set(d) for d in dets]
    for x in range(m):
        for y in range(x, m):
            da, db = dets[x], dets[y]
            only_a = sorted(sets[x] - sets[y])
            only_b = sorted(sets[y] - sets[x])
            if len(only_a) > 2:
                continue
            if not only_a:
                e = core + sum(h[i, i] for i in da)
                e += 0.5 * sum(anti[i, j, i, j] for i in da for j in da)
            elif len(only_a) == 1:
                mm, pp = only_a[0], only_b[0]
                # bring m to the slot of p: sign from the orbitals strictly between
                sign = _sign_between([o for o in da if o != mm], mm, pp)
                e = h[mm, pp] + sum(anti[mm, i, pp, i] for i in da if i != mm)
                e *= sign
            else:
                (m1, m2), (p1, p2) = only_a, only_b
                common = [o for o in da if o not in (m1, m2)]
                # order-sign of each determinant relative to (m1, m2, common...)
                sa = _perm_sign(list(da), [m1, m2] + common)
                sb = _perm_sign(list(db), [p1, p2] + common)
                e = sa * sb * anti[m1, m2, p1, p2]
            out[x, y] = out[y, x] = e
    return out


def _perm_sign(order: list, target: list) -> int:
    perm = [order.index(t) for t in target]
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def determinant_ci_energy(h: np.ndarray, v: np.ndarray, core: float, n_electrons: int) -> float:
    """Ground energy by explicit enumeration of determinants; independent of
    the operator-application path above."""
    n = h.shape[0]
    dets = list(combinations(range(n), n_electrons))
    if not dets:
        raise EmptySectorError("empty sector")
    mat = slater_condon_matrix(h, v, core, dets)
    return float(np.linalg.eigvalsh(mat)[0])


# -- dense Jordan-Wigner operators and the fermionic swap ---------------------

_Z = np.diag([1.0, -1.0])
_LOWER = np.array([[0.0, 1.0], [0.0, 0.0]])  # |0><1| on one mode


def jw_annihilation(n_modes: int, p: int) -> np.ndarray:
    """Dense a_p; bit p of the basis index is the occupation of mode p."""
    if not 0 <= p < n_modes:
        raise ValueError("mode out of range")
    if n_modes > MAX_MODES:
        raise OracleSizeError("too many modes for dense operators")
    op = np.ones((1, 1))
    # kron order puts mode n-1 leftmost so mode p is bit p of the index
    for m in reversed(range(n_modes)):
        f = _LOWER if m == p else (_Z if m < p else np.eye(2))
        op = np.kron(op, f)
    return op


def jw_creation(n_modes: int, p: int) -> np.ndarray:
    return jw_annihilation(n_modes, p).T.copy()


def fswap_operator(n_modes: int, p: int, q: int) -> np.ndarray:
    if abs(p - q) != 1:
        raise ValueError("fermionic swap needs adjacent modes")
    ap, aq = jw_annihilation(n_modes, p), jw_annihilation(n_modes, q)
    cp, cq = ap.T, aq.T
    return np.eye(1 << n_modes) + cp @ aq + cq @ ap - cp @ ap - cq @ aq


def fswap_conjugation_check(n_modes: int = 4, p: int = 0, q: int = 1) -> bool:
    """Exact check that f a+_p f^dag = a+_q, f a+_q f^dag = a+_p and f^2 = 1."""
    f = fswap_operator(n_modes, p, q)
    eye = np.eye(1 << n_modes)
    cp, cq = jw_creation(n_modes, p), jw_creation(n_modes, q)
    entries_ok = bool(np.all(np.isin(f, (-1.0, 0.0, 1.0))))
    return (entries_ok
            and np.array_equal(f @ f.T, eye)
            and np.array_equal(f @ f, eye)
            and np.array_equal(f @ cp @ f.T, cq)
            and np.array_equal(f @ cq @ f.T, cp))


def anticommutator_defect(n_modes: int) -> float:
    """max |{a_p, a+_q} - delta_pq| + max |{a_p, a_q}| over all modes."""
    ops = [jw_annihilation(n_modes, p) for p in range(n_modes)]
    eye = np.eye(1 << n_modes)
    worst = 0.0
    for p in range(n_modes):
        for q in range(n_modes):
            a, b = ops[p], ops[q]
            worst = max(worst, np.abs(a @ b.T + b.T @ a - (p == q) * eye).max(),
                        np.abs(a @ b + b @ a).max())
    return float(worst)
