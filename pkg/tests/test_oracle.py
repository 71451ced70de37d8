import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgblock.oracle import (MAX_MODES, OracleSizeError, anticommutator_defect,
                            build_hamiltonian_matrix, determinant_ci_energy, fci_energy,
                            fswap_conjugation_check, fswap_operator, ground_energy,
                            jw_annihilation, jw_creation, sector_states, spin_orbital_integrals)


def random_integrals(rng, n):
    """Hermitian h and a v with the symmetries of a real two-body operator."""
    a = rng.standard_normal((n, n))
    h = 0.5 * (a + a.T)
    v = rng.standard_normal((n, n, n, n))
    v = 0.5 * (v + v.transpose(1, 0, 3, 2))  # relabel
    v = 0.5 * (v + v.transpose(3, 2, 1, 0))  # hermiticity (real)
    return h, v


def dense_jw_hamiltonian(h, v, core):
    n = h.shape[0]
    a = [jw_annihilation(n, p) for p in range(n)]
    c = [x.T for x in a]
    out = core * np.eye(1 << n)
    for p, q in itertools.product(range(n), repeat=2):
        out += h[p, q] * c[p] @ a[q]
    for p, q, r, s in itertools.product(range(n), repeat=4):
        if v[p, q, r, s]:
            out += 0.5 * v[p, q, r, s] * c[p] @ c[q] @ a[r] @ a[s]
    return out


def test_noninteracting_subset_sums():
    eps = np.array([-1.0, 0.3, 0.7, 2.0])
    fock = build_hamiltonian_matrix(np.diag(eps), np.zeros((4,) * 4), core=0.5)
    w = np.sort(np.linalg.eigvalsh(fock.matrix.toarray()))
    sums = sorted(0.5 + sum(c) for k in range(5) for c in itertools.combinations(eps, k))
    np.testing.assert_allclose(w, sums, atol=1e-12)


def test_two_modes_single_term():
    v = np.zeros((2, 2, 2, 2))
    v[0, 1, 1, 0] = 0.8  # 1/2 (v0110 a0+ a1+ a1 a0 + ...) with v1001 = v0110 by relabeling
    v[1, 0, 0, 1] = 0.8
    h = np.array([[0.1, 0.2], [0.2, 0.3]])
    mat = build_hamiltonian_matrix(h, v).matrix.toarray()
    # basis |00>, |01> (mode 0), |10> (mode 1), |11>
    expect = np.array([[0, 0, 0, 0], [0, 0.1, 0.2, 0], [0, 0.2, 0.3, 0], [0, 0, 0, 0.4 + 0.8]])
    np.testing.assert_allclose(mat, expect, atol=1e-14)


def test_random_six_modes_against_two_oracles():
    rng = np.random.default_rng(0)
    h, v = random_integrals(rng, 6)
    fock = build_hamiltonian_matrix(h, v, 0.25)
    mat = fock.matrix.toarray()
    assert np.max(np.abs(mat - mat.T)) < 1e-12
    np.testing.assert_allclose(mat, dense_jw_hamiltonian(h, v, 0.25), atol=1e-12)
    n = fock.particle_numbers()
    assert np.all(mat[n[:, None] != n[None, :]] == 0)  # number conserving
    for ne in range(0, 7):
        if ne == 0:
            assert ground_energy(fock, 0) == pytest.approx(0.25)
            continue
        e_ci = determinant_ci_energy(h, v, 0.25, ne)
        assert abs(ground_energy(fock, ne) - e_ci) < 1e-10


def test_sector_matches_full_space():
    rng = np.random.default_rng(1)
    h, v = random_integrals(rng, 6)
    full = build_hamiltonian_matrix(h, v, 0.0)
    sector = build_hamiltonian_matrix(h, v, 0.0, n_electrons=3)
    assert abs(ground_energy(full, 3) - ground_energy(sector)) < 1e-10


def test_zero_and_one_electron():
    rng = np.random.default_rng(2)
    h, v = random_integrals(rng, 4)
    fock = build_hamiltonian_matrix(h, v, 1.5)
    assert ground_energy(fock, 0) == 1.5
    assert ground_energy(fock, 1) == pytest.approx(np.linalg.eigvalsh(h)[0] + 1.5, abs=1e-12)


def test_spin_sector_fci():
    rng = np.random.default_rng(3)
    n = 3
    a = rng.standard_normal((n, n))
    h = 0.5 * (a + a.T)
    # spatial (ps|qr)-type tensor from a positive kernel on random orbitals
    phi, _ = np.linalg.qr(rng.standard_normal((8, n)))
    k = np.exp(-np.abs(np.subtract.outer(np.arange(8), np.arange(8))))
    rho = phi[:, :, None] * phi[:, None, :]
    chem = np.einsum("mps,mn,nqr->psqr", rho, k, rho)
    v = chem.transpose(0, 2, 3, 1)
    e = fci_energy(h, v, 0.0, 1, 1)
    h1, v2 = spin_orbital_integrals(h, v)
    e_ci = determinant_ci_energy(h1, v2, 0.0, 2)
    assert e >= e_ci - 1e-10  # the 2-electron sector includes the triplets
    full = build_hamiltonian_matrix(h1, v2, 0.0, n_electrons=2)
    assert abs(min(e, fci_energy(h, v, 0.0, 2, 0)) - ground_energy(full)) < 1e-10


def test_size_limits():
    n = MAX_MODES + 1
    with pytest.raises(OracleSizeError):
        build_hamiltonian_matrix(np.zeros((n, n)), np.zeros((n,) * 4))
    with pytest.raises(OracleSizeError):
        jw_annihilation(n, 0)


def test_sector_state_counts():
    assert sector_states(6, 3).size == 20
    assert sector_states(6, n_alpha=1, n_beta=2).size == 9
    assert sector_states(4).size == 16


def test_fswap_two_modes_explicit():
    f = fswap_operator(2, 0, 1)
    # |00> -> |00>, |01> <-> |10>, |11> -> -|11>
    expect = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, -1]], dtype=float)
    np.testing.assert_array_equal(f, expect)
    assert fswap_conjugation_check(2, 0, 1)


@pytest.mark.parametrize("p", [0, 1, 2])
def test_fswap_four_modes(p):
    f = fswap_operator(4, p, p + 1)
    np.testing.assert_array_equal(f @ f, np.eye(16))
    np.testing.assert_array_equal(f @ jw_creation(4, p) @ f.T, jw_creation(4, p + 1))
    np.testing.assert_array_equal(f @ jw_creation(4, p + 1) @ f.T, jw_creation(4, p))
    assert fswap_conjugation_check(4, p, p + 1)


def test_fswap_rejects_distant_modes():
    with pytest.raises(ValueError):
        fswap_operator(4, 0, 2)


def test_canonical_anticommutation():
    assert anticommutator_defect(4) == 0.0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 5), ne=st.integers(1, 3))
def test_sparse_builder_matches_dense_jw(seed, n, ne):
    h, v = random_integrals(np.random.default_rng(seed), n)
    fock = build_hamiltonian_matrix(h, v, 0.0)
    np.testing.assert_allclose(fock.matrix.toarray(), dense_jw_hamiltonian(h, v, 0.0), atol=1e-11)
    if ne <= n:
        assert abs(ground_energy(fock, ne) - determinant_ci_energy(h, v, 0.0, ne)) < 1e-9
