"""Acceptance criteria 1-12; each test records one PASS/FAIL line that is
printed in the terminal summary."""

import itertools
import json
import time
from math import comb

import numpy as np
import pytest

from dgblock.activespace import project_active_hamiltonian
from dgblock.blockham import build_dg_hamiltonian, dense_twobody, expand_to_full, transform_twobody
from dgblock.cli import main
from dgblock.costmodel import lambda_metric
from dgblock.dgbasis import (compress, dg_block_diagonal_matrix, discarded_weight,
                             partition_atom_centered, projection_residual)
from dgblock.io import read_csv
from dgblock.lowrank import factorize_pair, pair_reconstruction_error
from dgblock.oracle import fci_energy, fswap_conjugation_check, fswap_operator
from dgblock.swapnet import (block_diagonal_strategy, count_acquainted, double_bipartite_network,
                             k4_complete_network, p_swap_network, required_quadruples,
                             verify_schedule)

from conftest import dense_rotation_oracle, random_dg_instance, record_criterion

SWEEP_INI = "[sweep]\nsizes = 4, 6, 8, 10, 12, 14, 16\n[dg]\ntaus = 0.01\n"


def fci(h, v, core):
    return fci_energy(h, v, core, 1, 1)


def active_and_dg(system, active, taus):
    ah = project_active_hamiltonian(system, active.orbitals)
    part = partition_atom_centered(system.grid, system.geometry)
    e_act = fci(ah.h_a, ah.v_a, ah.core_energy)
    out = {}
    for tau in taus:
        dg = compress(active.orbitals, part, tau)
        ham = build_dg_hamiltonian(system, dg)
        out[tau] = (dg, fci(ham.one_body.h_d, dense_twobody(ham.two_body), ham.core_energy))
    return e_act, out


def test_criterion_01_block_sparsity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    violations, mismatch = 0, 0.0
    for _ in range(25):
        nb = int(rng.integers(1, 5))
        n_kappa = [int(x) for x in rng.integers(1, 5, size=nb)]
        system, dg = random_dg_instance(rng, nb, n_kappa)
        full = expand_to_full(transform_twobody(system, dg))
        off = np.concatenate([[0], np.cumsum(n_kappa)])
        blk = np.searchsorted(off, np.arange(off[-1]), side="right") - 1
        c = full.coords
        violations += int(np.sum((blk[c[:, 0]] != blk[c[:, 3]]) | (blk[c[:, 1]] != blk[c[:, 2]])))
        oracle = dense_rotation_oracle(system, dg_block_diagonal_matrix(dg))
        mismatch = max(mismatch, float(np.max(np.abs(oracle - full.todense()))))
    dt = time.perf_counter() - t0
    ok = violations == 0 and mismatch < 1e-12 and dt < 5
    record_criterion(1, ok, f"25 instances, {violations} pattern violations, "
                            f"max |oracle - expansion| {mismatch:.1e}, {dt:.2f} s")
    assert ok


def test_criterion_02_tau_zero_equivalence(h2_system, h2_active):
    t0 = time.perf_counter()
    act = h2_active[2]
    e_act, res = active_and_dg(h2_system, act, [0.0])
    dg, e_dg = res[0.0]
    dt = time.perf_counter() - t0
    diff = abs(e_dg - e_act)
    ok = dg.n_blocks == 2 and act.orbitals.n_active == 2 and diff <= 1e-9 and dt < 10
    record_criterion(2, ok, f"N_a=2 N_b=2 n_kappa={dg.n_kappa}: E_active={e_act:.10f} "
                            f"E_DG(tau=0)={e_dg:.10f} |diff|={diff:.2e} (tol 1e-9), {dt:.1f} s")
    assert ok


def test_criterion_03_variational_chain(h2_system, h2_active):
    t0 = time.perf_counter()
    e_act, res = active_and_dg(h2_system, h2_active[4], [1e-8, 1e-1])
    e_fine, e_coarse = res[1e-8][1], res[1e-1][1]
    dt = time.perf_counter() - t0
    ok = e_fine <= e_act + 1e-9 and e_coarse >= e_fine - 1e-9 and dt < 30
    record_criterion(3, ok, f"N_a=4: E_active={e_act:.8f} E_DG(1e-8)={e_fine:.8f} "
                            f"(n_kappa={res[1e-8][0].n_kappa}) E_DG(1e-1)={e_coarse:.8f} "
                            f"(n_kappa={res[1e-1][0].n_kappa}), {dt:.1f} s")
    assert ok


def test_criterion_04_svd_monotone_and_identity(h4_chain):
    t0 = time.perf_counter()
    system, act, _, _, _ = h4_chain
    part = partition_atom_centered(system.grid, system.geometry)
    phi = act.orbitals.phi
    counts, worst = [], 0.0
    for tau in (1e-3, 1e-2, 1e-1):
        dg = compress(act.orbitals, part, tau)
        counts.append(dg.n_kappa)
        worst = max(worst, abs(projection_residual(dg, phi) - discarded_weight(dg)))
    monotone = all(a >= b for lo, hi in zip(counts, counts[1:]) for a, b in zip(lo, hi))
    dt = time.perf_counter() - t0
    ok = monotone and worst <= 1e-10 and dt < 5
    record_criterion(4, ok, f"n_kappa over tau 1e-3,1e-2,1e-1: {counts}; "
                            f"max |residual - discarded| {worst:.1e}, {dt:.2f} s")
    assert ok


@pytest.fixture(scope="module")
def cli_sweeps(tmp_path_factory):
    root = tmp_path_factory.mktemp("sweep")
    ini = root / "sweep.ini"
    ini.write_text(SWEEP_INI)
    timings = {}
    for workers in (1, 8):
        t0 = time.perf_counter()
        assert main(["sweep", str(ini), "-o", str(root / f"j{workers}"), "-j",
                     str(workers)]) == 0
        timings[workers] = time.perf_counter() - t0
    return root, timings


def manifests(root):
    return [json.loads(p.read_text()) for p in sorted(root.glob("N*/manifest.json"))]


def test_criterion_05_mean_n_kappa_plateau(cli_sweeps):
    root, timings = cli_sweeps
    docs = {d["n_atoms"]: d for d in manifests(root / "j1")}
    mean = {n: float(docs[n]["summary"]["reports"][2]["mean_n_kappa"]) for n in docs}
    rel = abs(mean[16] - mean[12]) / mean[12]
    ok = rel <= 0.15 and timings[1] < 300
    series = " ".join(f"{n}:{mean[n]:.2f}" for n in sorted(mean))
    record_criterion(5, ok, f"<n_kappa> by N {series}; |16 vs 12| = {100 * rel:.1f}% "
                            f"(tol 15%), sweep {timings[1]:.0f} s")
    assert ok


def test_criterion_06_crossover(cli_sweeps):
    root, timings = cli_sweeps
    rep = json.loads((root / "j1" / "crossover.json").read_text())
    n_nnz = rep["crossover"]["dg(0.01)/nnz"]
    n_lam = rep["crossover"]["dg(0.01)/lambda"]
    a_dg = rep["fits"]["dg(0.01)/nnz"]["alpha"]
    a_act = rep["fits"]["active/nnz"]["alpha"]
    ok = (n_nnz is not None and n_nnz <= 24 and n_lam is not None and n_lam <= 24
          and a_dg < a_act - 1.0 and timings[1] < 600)
    record_criterion(6, ok, f"N*(nnz)={n_nnz} N*(lambda)={n_lam}; alpha_nnz DG={a_dg:.2f} "
                            f"active={a_act:.2f}; alpha_lambda DG="
                            f"{rep['fits']['dg(0.01)/lambda']['alpha']:.2f} active="
                            f"{rep['fits']['active/lambda']['alpha']:.2f}")
    assert ok


def test_criterion_07_swap_coverage():
    t0 = time.perf_counter()
    ratios, incomplete = {}, []
    for nb, n in itertools.product((1, 2, 3, 4), (2, 4, 6)):
        s = block_diagonal_strategy(nb, n)
        rep = verify_schedule(s, required_quadruples(nb, n))
        if not rep.complete:
            incomplete.append((nb, n))
        ratios[(nb, n)] = s.depth / (nb * n**3)
    c = max(ratios.values())
    bounded = all(r <= c for r in ratios.values())
    dt = time.perf_counter() - t0
    ok = not incomplete and bounded and dt < 300
    record_criterion(7, ok, f"12 configurations, incomplete {incomplete}; fitted "
                            f"c = {c:.2f} in depth <= c N_b n_kappa^3, {dt:.1f} s")
    assert ok


def test_criterion_08_subnetwork_counts():
    t0 = time.perf_counter()
    k4 = {n: count_acquainted(k4_complete_network(n)) for n in range(4, 11)}
    k4_ok = all(k4[n] == comb(n, 4) for n in k4)
    db = {n: count_acquainted(double_bipartite_network(n, n)) for n in (2, 3, 4)}
    db_ok = all(db[n] == comb(n, 2) ** 2 for n in db)
    sizes = (1, 2, 1, 2, 2)
    off = np.concatenate([[0], np.cumsum(sizes)])
    parts = [list(range(off[i], off[i + 1])) for i in range(len(sizes))]
    unions = [frozenset(a + b) for a, b in itertools.combinations(parts, 2)]
    acquainted = set(p_swap_network(sizes).acquainted_sets())
    ps = sum(1 for u in unions if u in acquainted)
    dt = time.perf_counter() - t0
    ok = k4_ok and db_ok and ps == 10 and dt < 60
    record_criterion(8, ok, f"K4 counts {k4}; double-bipartite {db}; "
                            f"P-swap unions {ps}/10, {dt:.1f} s")
    assert ok


def test_criterion_09_low_rank(h4_self_dg):
    t0 = time.perf_counter()
    tb = h4_self_dg[3].two_body
    worst_err, failures, max_l, max_rho = 0.0, [], 0, 0
    for (k, kp) in sorted(tb.pairs):
        f = factorize_pair(tb, k, kp, 1e-8)
        err = pair_reconstruction_error(tb, f)
        nsum = tb.n_kappa[k] + tb.n_kappa[kp]
        rho = max(f.inner_ranks)
        worst_err = max(worst_err, err)
        max_l, max_rho = max(max_l, f.outer_rank), max(max_rho, rho)
        if err > 1e-6 or f.outer_rank > nsum**2 or rho > nsum:
            failures.append((k, kp))
    dt = time.perf_counter() - t0
    ok = not failures and dt < 60
    record_criterion(9, ok, f"H4 DG n_kappa={tb.n_kappa}, {len(tb.pairs)} pairs: max error "
                            f"{worst_err:.1e}, max L_pair {max_l}, max rho {max_rho}; "
                            f"violations {failures}, {dt:.1f} s")
    assert ok


def test_criterion_10_fermionic_swap():
    t0 = time.perf_counter()
    checks = [fswap_conjugation_check(4, p, p + 1) for p in range(3)]
    invol = all(np.array_equal(fswap_operator(4, p, p + 1) @ fswap_operator(4, p, p + 1),
                               np.eye(16)) for p in range(3))
    dt = time.perf_counter() - t0
    ok = all(checks) and invol and dt < 1
    record_criterion(10, ok, f"adjacent pairs (0,1),(1,2),(2,3): {checks}; involution {invol}, "
                             f"{dt * 1000:.0f} ms")
    assert ok


def test_criterion_11_lambda_semantics():
    t0 = time.perf_counter()
    cases = []
    v = np.zeros((3, 3, 3, 3))
    v[0, 1, 0, 1], v[1, 2, 0, 2], v[2, 2, 1, 0] = 4.0, -0.5, 0.25
    cases.append((lambda_metric(v), 0.75))
    cases.append((lambda_metric(v, exclude_number_terms=False), 4.75))
    w = np.zeros((3, 3, 3, 3))
    w[1, 1, 1, 1], w[2, 0, 2, 0], w[0, 2, 0, 2] = 1.0, 2.0, -3.0
    cases.append((lambda_metric(w), 0.0))
    u = np.zeros((3, 3, 3, 3))
    u[0, 1, 1, 0], u[2, 1, 2, 0], u[1, 0, 2, 1] = 0.5, -0.125, 2.0
    cases.append((lambda_metric(u), 2.625))
    dt = time.perf_counter() - t0
    ok = all(got == want for got, want in cases) and dt < 1
    record_criterion(11, ok, f"hand-built sums {[g for g, _ in cases]} expected "
                             f"{[w_ for _, w_ in cases]}")
    assert ok


def test_criterion_12_determinism(cli_sweeps):
    root, timings = cli_sweeps
    a = (root / "j1" / "sweep.csv").read_bytes()
    b = (root / "j8" / "sweep.csv").read_bytes()
    man_same = all((root / "j1" / p.parent.name / "manifest.json").read_bytes() == p.read_bytes()
                   for p in (root / "j8").glob("N*/manifest.json"))
    rows = len(read_csv(root / "j1" / "sweep.csv"))
    ok = a == b and man_same
    record_criterion(12, ok, f"sweep.csv with 1 and 8 workers byte-identical: {a == b} "
                             f"({rows} rows), manifests identical: {man_same}; "
                             f"{timings[1]:.0f} s vs {timings[8]:.0f} s")
    assert ok
