"""End-to-end runs shared by the CLI and the acceptance checks."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .activespace import ActiveHamiltonian, ActiveSpace, build_active_space, project_active_hamiltonian
from .blockham import DGHamiltonian, build_dg_hamiltonian, dense_twobody, pair_nonzero_counts
from .config import ExperimentConfig
from .costmodel import (ACTIVE, CostReport, cost_report, detect_crossover, dg_tag, fit_scaling,
                        primitive_report)
from .dgbasis import DGBasis, Partition, compress, partition_atom_centered, partition_uniform
from .io import csv_text, fmt, json_text, atomic_write, sha256, write_fcidump, write_matrices
from .primitive import Geometry, PrimitiveSystem, assemble_primitive, build_grid

log = logging.getLogger(__name__)

MANIFEST_SCHEMA = "dgblock.manifest/1"
SWEEP_SCHEMA = "dgblock.crossover/1"
CSV_NOTE = "lambda in hartree; nnz counts entries with |v| > cutoff"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def build_system(cfg: ExperimentConfig, n_atoms: int | None = None) -> PrimitiveSystem:
    if cfg.geometry_file:
        geom = Geometry.from_text(Path(cfg.geometry_file).read_text(), cfg.softening)
    else:
        geom = Geometry.chain(n_atoms or cfg.n_atoms, cfg.bond, dim=cfg.dim,
                              softening=cfg.softening)
    grid = build_grid(geom, cfg.spacing, cfg.padding, cfg.periodic)
    scheme = None if cfg.kinetic == "auto" else cfg.kinetic
    return assemble_primitive(grid, geom, scheme, cfg.softening, cfg.self_term)


def build_partition(cfg: ExperimentConfig, system: PrimitiveSystem) -> Partition:
    if cfg.partition == "uniform":
        return partition_uniform(system.grid, cfg.n_blocks)
    return partition_atom_centered(system.grid, system.geometry)


@dataclass
class DGRun:
    tau: float
    basis: DGBasis
    hamiltonian: DGHamiltonian
    report: CostReport


@dataclass
class ChainRun:
    config: ExperimentConfig
    n_atoms: int
    n_electrons: int
    system: PrimitiveSystem
    active: ActiveSpace
    active_ham: ActiveHamiltonian
    partition: Partition
    dg: list = field(default_factory=list)
    reports: list = field(default_factory=list)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except Exception as exc:  # re-raised with the stage attached
        raise StageError(name, exc) from exc


def run_chain(cfg: ExperimentConfig, n_atoms: int | None = None) -> ChainRun:
    n_atoms = n_atoms or cfg.n_atoms
    system = _stage("primitive", build_system, cfg, n_atoms)
    n_el = cfg.n_electrons or int(round(system.geometry.charges.sum()))
    active = _stage("active", build_active_space, system, n_el, cfg.active_spec(), cfg.seed)
    ah = _stage("active", project_active_hamiltonian, system, active.orbitals)
    part = _stage("partition", build_partition, cfg, system)
    run = ChainRun(cfg, n_atoms, n_el, system, active, ah, part)
    run.reports.append(primitive_report(system.v_p, cfg.cutoff))
    run.reports.append(cost_report(ACTIVE, ah.v_a, ah.n_active, cutoff=cfg.cutoff))
    for tau in cfg.taus:
        dg = _stage("dgbasis", compress, active.orbitals, part, tau, cfg.tau_mode)
        ham = _stage("blockham", build_dg_hamiltonian, system, dg)
        rep = cost_report(dg_tag(tau), ham.two_body, dg.n_functions, dg.n_kappa, cfg.cutoff)
        run.dg.append(DGRun(tau, dg, ham, rep))
        run.reports.append(rep)
    return run


def _report_dict(r: CostReport) -> dict:
    return {"representation": r.representation, "n_functions": r.n_functions,
            "nnz": r.nnz_two_body, "lambda": fmt(r.lam), "n_kappa": list(r.n_kappa),
            "mean_n_kappa": None if not r.n_kappa else fmt(r.mean_n_kappa)}


def summary(run: ChainRun) -> dict:
    scf = run.active.scf
    doc = {"n_atoms": run.n_atoms, "n_electrons": run.n_electrons,
           "n_points": run.system.n_points, "n_active": run.active_ham.n_active,
           "partition_sizes": run.partition.sizes,
           "scf_energy": None if scf is None else fmt(scf.energy),
           "scf_iterations": None if scf is None else scf.n_iter,
           "reports": [_report_dict(r) for r in run.reports],
           "dg": [{"tau": d.tau, "n_kappa": d.basis.n_kappa, "n_functions": d.basis.n_functions,
                   "discarded_weight": fmt(float(sum(np.sum(x * x)
                                                     for x in d.basis.discarded_values))),
                   "pair_nnz": pair_nonzero_counts(d.hamiltonian.two_body, run.config.cutoff)}
                  for d in run.dg]}
    return doc


def manifest(cfg: ExperimentConfig, files: dict, body: dict, failed: StageError | None = None) -> dict:
    doc = {"schema": MANIFEST_SCHEMA, "version": __version__, "config": cfg.physical_dict(),
           "n_atoms": body.get("n_atoms", cfg.n_atoms), "files": files, "summary": body,
           "status": "ok" if failed is None else "failed"}
    if failed is not None:
        doc["failed_stage"] = failed.stage
        doc["error"] = str(failed.cause)
    return doc


def _tau_name(tau: float) -> str:
    return f"{tau:g}".replace("+", "")


def write_chain_artifacts(run: ChainRun, outdir) -> dict:
    """Write the binary/integral artifacts and the manifest; return the manifest."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    s = run.system
    files = {}

    def put(name, writer, *args):
        writer(out / name, *args)
        files[name] = sha256(out / name)

    put("primitive.dgb1", write_matrices, [s.h_p, s.v_p])
    put("active-orbitals.dgb1", write_matrices, [run.active.orbitals.phi, run.active.density.D])
    ah = run.active_ham
    put("active.fcidump", write_fcidump, ah.h_a, ah.v_a, ah.core_energy, run.n_electrons)
    many = len(run.dg) > 1
    for d in run.dg:
        suffix = f"-tau{_tau_name(d.tau)}" if many else ""
        recs = []
        for block, u, sv in zip(d.basis.partition.blocks, d.basis.U_blocks,
                                d.basis.singular_values):
            recs += [np.asarray(block, dtype=float)[None, :], u, sv[None, :]]
        put(f"dg-basis{suffix}.dgb1", write_matrices, recs)
        tb = d.hamiltonian.two_body
        pair_recs = [d.hamiltonian.one_body.h_d]
        for (k, kp) in sorted(tb.pairs):
            t = tb.pairs[(k, kp)]
            pair_recs.append(t.reshape(t.shape[0] * t.shape[1], -1))
        put(f"dg-twobody{suffix}.dgb1", write_matrices, pair_recs)
        put(f"dg{suffix}.fcidump", write_fcidump, d.hamiltonian.one_body.h_d,
            dense_twobody(tb), d.hamiltonian.core_energy, run.n_electrons)
    doc = manifest(run.config, files, summary(run))
    atomic_write(out / "manifest.json", json_text(doc))
    return doc


def write_failed_manifest(cfg: ExperimentConfig, outdir, err: StageError) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "manifest.json", json_text(manifest(cfg, {}, {}, err)))


def load_dg_twobody(outdir, manifest_doc: dict, tau_index: int = 0):
    """Read back (h_d, BlockTwoBody) written by write_chain_artifacts."""
    from .blockham import BlockTwoBody
    from .io import read_matrices

    dg = manifest_doc["summary"]["dg"][tau_index]
    n_kappa = dg["n_kappa"]
    suffix = ""
    if len(manifest_doc["summary"]["dg"]) > 1:
        suffix = f"-tau{_tau_name(dg['tau'])}"
    recs = read_matrices(Path(outdir) / f"dg-twobody{suffix}.dgb1")
    h_d, rest = recs[0], recs[1:]
    pairs = {}
    nb = len(n_kappa)
    keys = [(k, kp) for k in range(nb) for kp in range(k, nb)]
    if len(keys) != len(rest):
        raise ValueError("pair records do not match the block count")
    for (k, kp), m in zip(keys, rest):
        pairs[(k, kp)] = m.reshape(n_kappa[k], n_kappa[kp], n_kappa[kp], n_kappa[k])
    return h_d, BlockTwoBody(pairs, list(n_kappa))


# -- sweeps ----------------------------------------------------------------------

def sweep_row(cfg: ExperimentConfig, n_atoms: int) -> dict:
    run = run_chain(cfg, n_atoms)
    return manifest(cfg, {}, summary(run))


def run_sweep(cfg: ExperimentConfig, workers: int = 1) -> list[dict]:
    """Per-size manifests in size order; sizes run concurrently on threads."""
    sizes = list(cfg.sweep_sizes)
    if workers <= 1:
        return [sweep_row(cfg, n) for n in sizes]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda n: sweep_row(cfg, n), sizes))


def write_sweep(cfg: ExperimentConfig, outdir, workers: int = 1) -> list[dict]:
    out = Path(outdir)
    docs = run_sweep(cfg, workers)
    for doc in docs:
        atomic_write(out / f"N{doc['n_atoms']:03d}" / "manifest.json", json_text(doc))
    return docs


def series_table(manifests) -> dict:
    """{representation: {N: (n_functions, nnz, lambda)}} from per-size manifests."""
    if len(manifests) < 3:
        raise ValueError("need at least 3 sizes")
    ref = manifests[0]["config"]
    table = {}
    for doc in manifests:
        if doc.get("status") != "ok":
            raise ValueError(f"manifest for N={doc.get('n_atoms')} is not complete")
        if doc["config"] != ref:
            raise ValueError("inconsistent grids or settings across sizes")
        n = doc["n_atoms"]
        for r in doc["summary"]["reports"]:
            table.setdefault(r["representation"], {})[n] = (
                r["n_functions"], r["nnz"], float(r["lambda"]))
    return table


def crossover_outputs(manifests, cutoff_note: str = CSV_NOTE) -> tuple[str, dict]:
    """CSV text (N, representation, N_functions, nnz, lambda) and the JSON report."""
    manifests = sorted(manifests, key=lambda d: d["n_atoms"])
    table = series_table(manifests)
    rows = []
    for rep in table:
        for n in sorted(table[rep]):
            nf, nnz, lam = table[rep][n]
            rows.append([n, rep, nf, nnz, fmt(lam)])
    csv = csv_text(["N", "representation", "N_functions", "nnz", "lambda"], rows, cutoff_note)
    fits, crossings = {}, {}
    for rep, series in table.items():
        ns = sorted(series)
        for metric, col in (("nnz", 1), ("lambda", 2)):
            pts = [(n, series[n][col]) for n in ns]
            if any(y <= 0 for _, y in pts[1:]):
                continue
            f = fit_scaling(pts)
            fits[f"{rep}/{metric}"] = {"alpha": round(f.alpha, 10), "c": round(f.c, 6),
                                       "a": round(f.a, 10), "residual": round(f.residual, 10),
                                       "fit_range": f.fit_range}
    act = table.get(ACTIVE)
    for rep, series in table.items():
        if not rep.startswith("dg(") or act is None:
            continue
        for metric, col in (("nnz", 1), ("lambda", 2)):
            a = {n: act[n][col] for n in act}
            b = {n: series[n][col] for n in series}
            crossings[f"{rep}/{metric}"] = detect_crossover(a, b)
    mean_nk = {}
    for d in manifests:
        for r in d["summary"]["reports"]:
            if r["representation"].startswith("dg("):
                mean_nk.setdefault(r["representation"], {})[str(d["n_atoms"])] = r["mean_n_kappa"]
    doc = {"schema": SWEEP_SCHEMA, "version": __version__,
           "sizes": [d["n_atoms"] for d in manifests], "fits": fits, "crossover": crossings,
           "mean_n_kappa": mean_nk}
    return csv, doc
