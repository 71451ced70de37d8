"""Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 verification
failure, 3 numerical failure (non-convergence, PSD violation).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from itertools import combinations
from pathlib import Path

import numpy as np

from . import __version__, pipeline
from .activespace import SCFConvergenceError, SingularGramError
from .config import ConfigError, ExperimentConfig
from .io import atomic_write, csv_text, fmt, json_text
from .lowrank import NotPSDError, factorize_pair, pair_reconstruction_error, trotter_depth_estimate
from . import swapnet as sw

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("dgblock")

NUMERICAL = (SCFConvergenceError, SingularGramError, NotPSDError, np.linalg.LinAlgError,
             FloatingPointError)


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if getattr(args, "output", None):
        changes["output"] = args.output
    if getattr(args, "workers", None):
        changes["workers"] = args.workers
    return cfg.replace(**changes) if changes else cfg.validate()


def _stage_exit(err: pipeline.StageError) -> int:
    return EXIT_NUMERIC if isinstance(err.cause, NUMERICAL) else EXIT_USAGE


# -- chain / sweep / crossover ---------------------------------------------------

def cmd_chain(args) -> int:
    cfg = _load_config(args)
    try:
        run = pipeline.run_chain(cfg)
    except pipeline.StageError as err:
        pipeline.write_failed_manifest(cfg, cfg.output, err)
        log.error("%s", err)
        return _stage_exit(err)
    doc = pipeline.write_chain_artifacts(run, cfg.output)
    for r in doc["summary"]["reports"]:
        print(f"{r['representation']:>12s}  N={r['n_functions']:<5d} nnz={r['nnz']:<10d} "
              f"lambda={r['lambda']}")
    print(f"wrote {len(doc['files'])} artifacts + manifest to {cfg.output}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    try:
        docs = pipeline.write_sweep(cfg, cfg.output, cfg.workers)
    except pipeline.StageError as err:
        pipeline.write_failed_manifest(cfg, cfg.output, err)
        log.error("%s", err)
        return _stage_exit(err)
    print(f"wrote {len(docs)} manifests under {cfg.output}")
    if len(docs) >= 3:
        csv, report = pipeline.crossover_outputs(docs)
        atomic_write(Path(cfg.output) / "sweep.csv", csv)
        atomic_write(Path(cfg.output) / "crossover.json", json_text(report))
        print(f"wrote sweep.csv and crossover.json under {cfg.output}")
    return EXIT_OK


def _find_manifests(paths) -> list[Path]:
    found = []
    for p in map(Path, paths):
        if p.is_dir():
            if (p / "manifest.json").exists():
                found.append(p / "manifest.json")
            found.extend(sorted(p.glob("*/manifest.json")))
        elif p.exists():
            found.append(p)
        else:
            raise FileNotFoundError(p)
    return found


def cmd_crossover(args) -> int:
    try:
        docs = [json.loads(p.read_text()) for p in _find_manifests(args.manifests)]
        csv, report = pipeline.crossover_outputs(docs)
    except (FileNotFoundError, ValueError, KeyError) as exc:
        log.error("crossover: %s", exc)
        return EXIT_USAGE
    out = Path(args.output)
    atomic_write(out / "crossover.csv", csv)
    atomic_write(out / "crossover.json", json_text(report))
    for key, n in sorted(report["crossover"].items()):
        print(f"{key:>24s}  crossover N* = {n}")
    for key, f in sorted(report["fits"].items()):
        print(f"{key:>24s}  alpha = {f['alpha']:.3f}")
    return EXIT_OK


# -- swap networks -----------------------------------------------------------------

def _build_network(args):
    """(schedule, requirement set) for the requested kind."""
    kind = args.kind
    if kind == "linear":
        s = sw.linear_swap_network(args.n)
        return s, sw.all_pairs(s.initial_mapping)
    if kind == "k4":
        s = sw.k4_complete_network(args.n)
        return s, frozenset(frozenset(c) for c in combinations(s.initial_mapping, 4))
    if kind == "pswap":
        s = sw.p_swap_network(args.parts)
        labels = list(s.initial_mapping)
        off = np.concatenate([[0], np.cumsum(args.parts)])
        parts = [labels[off[i]:off[i + 1]] for i in range(len(args.parts))]
        return s, frozenset(frozenset(a + b) for a, b in combinations(parts, 2))
    if kind == "double-bipartite":
        s = sw.double_bipartite_network(args.top, args.bottom)
        top = list(range(args.top))
        bottom = list(range(args.top, args.top + args.bottom))
        return s, frozenset(frozenset(a + b) for a in combinations(top, 2)
                            for b in combinations(bottom, 2))
    n_kappa = args.n_kappa
    if kind == "balanced":
        nk = n_kappa if isinstance(n_kappa, list) else [n_kappa]
        s = sw.balanced_double_bipartite_network(nk[0], nk[-1])
        req = {q for q in sw.required_quadruples(2, [nk[0], nk[-1]])
               if len({x.block for x in q}) == 2}
        return s, frozenset(req)
    if kind == "block-diagonal":
        s = sw.block_diagonal_strategy(args.blocks, n_kappa)
        return s, sw.required_quadruples(args.blocks, n_kappa)
    raise ValueError(f"unknown kind {kind!r}")


def cmd_swapnet(args) -> int:
    if args.n_kappa is not None and len(args.n_kappa) == 1:
        args.n_kappa = args.n_kappa[0]
    try:
        schedule, reqs = _build_network(args)
    except (ValueError, TypeError) as exc:
        log.error("swapnet: %s", exc)
        return EXIT_USAGE
    out = Path(args.output)
    if args.verify_file:
        try:
            schedule = sw.SwapSchedule.from_text(Path(args.verify_file).read_text())
        except (OSError, sw.ScheduleError, ValueError) as exc:
            log.error("swapnet: cannot read schedule: %s", exc)
            return EXIT_VERIFY
    else:
        atomic_write(out / "schedule.txt", schedule.to_text())
        atomic_write(out / "schedule.json", schedule.to_json() + "\n")
    try:
        rep = sw.verify_schedule(schedule, reqs)
    except sw.ScheduleError as exc:
        log.error("swapnet: invalid schedule: %s", exc)
        return EXIT_VERIFY
    doc = {"schema": "dgblock.swap_report/1", "version": __version__, "kind": args.kind,
           "name": schedule.name, "covered": rep.covered, "required": rep.total,
           "complete": rep.complete, "missing": rep.missing, "duplicates": rep.duplicates,
           "depth": rep.depth, "n_layers": rep.n_layers,
           "stage_depths": schedule.stage_depths,
           "final_mapping": [str(x) for x in rep.final_mapping]}
    atomic_write(out / "report.json", json_text(doc))
    print(f"{schedule.name}: covered {rep.covered}/{rep.total}, depth {rep.depth}, "
          f"{rep.n_layers} layers")
    if not rep.complete:
        for m in rep.missing[:20]:
            print("missing", " ".join(m))
        if len(rep.missing) > 20:
            print(f"... {len(rep.missing) - 20} more")
        return EXIT_VERIFY
    return EXIT_OK


# -- low rank ----------------------------------------------------------------------

def cmd_lowrank(args) -> int:
    root = Path(args.manifest)
    mpath = root / "manifest.json" if root.is_dir() else root
    try:
        doc = json.loads(mpath.read_text())
        h_d, tb = pipeline.load_dg_twobody(mpath.parent, doc, args.tau_index)
    except (OSError, KeyError, IndexError, ValueError) as exc:
        log.error("lowrank: missing or unreadable DG artifacts: %s", exc)
        return EXIT_USAGE
    rows, depth = [], {}
    try:
        for tol in args.outer_tol:
            factors = []
            for (k, kp) in sorted(tb.pairs):
                f = factorize_pair(tb, k, kp, tol, args.inner_tol)
                err = pair_reconstruction_error(tb, f)
                factors.append(f)
                rows.append([fmt(tol), f"{k}-{kp}", tb.n_kappa[k], tb.n_kappa[kp], f.n_union,
                             f.outer_rank, max(f.inner_ranks, default=0), f.depth, fmt(err),
                             fmt(f.min_eigenvalue)])
            _, total = trotter_depth_estimate(factors, tb.n_blocks)
            depth[fmt(tol)] = total
    except NotPSDError as exc:
        log.error("lowrank: %s", exc)
        return EXIT_NUMERIC
    header = ["outer_tol", "pair", "n_k", "n_kp", "n_union", "L_pair", "max_rho", "rho_sum",
              "frobenius_error", "min_eigenvalue"]
    out = Path(args.output) if args.output else mpath.parent
    atomic_write(out / "lowrank.csv",
                 csv_text(header, rows, "errors in hartree (Frobenius norm of the pair tensor)"))
    atomic_write(out / "lowrank.json", json_text(
        {"schema": "dgblock.lowrank/1", "version": __version__, "n_blocks": tb.n_blocks,
         "n_kappa": tb.n_kappa, "inner_tol": args.inner_tol, "trotter_depth": depth}))
    for tol, total in depth.items():
        print(f"outer_tol {tol}: Trotter depth estimate {total}")
    return EXIT_OK


def cmd_config(args) -> int:
    cfg = _load_config(args) if args.config else ExperimentConfig()
    sys.stdout.write(cfg.to_text())
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dgblock", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("chain", help="build all artifacts for one system")
    c.add_argument("config", nargs="?", help="INI experiment config")
    c.add_argument("-o", "--output", help="output directory (overrides [run] output)")
    c.set_defaults(func=cmd_chain)

    s = sub.add_parser("sweep", help="run the size sweep and write per-size manifests")
    s.add_argument("config", nargs="?")
    s.add_argument("-o", "--output")
    s.add_argument("-j", "--workers", type=int, help="worker threads")
    s.set_defaults(func=cmd_sweep)

    x = sub.add_parser("crossover", help="fits and crossover points from sweep manifests")
    x.add_argument("manifests", nargs="+", help="manifest files or sweep directories")
    x.add_argument("-o", "--output", default=".")
    x.set_defaults(func=cmd_crossover)

    w = sub.add_parser("swapnet", help="emit and verify a swap network")
    w.add_argument("--kind", required=True,
                   choices=["linear", "k4", "pswap", "double-bipartite", "balanced",
                            "block-diagonal"])
    w.add_argument("-n", type=int, default=4, help="width for linear and k4")
    w.add_argument("--parts", type=int, nargs="+", default=[1, 2, 1, 2, 2])
    w.add_argument("--top", type=int, default=2)
    w.add_argument("--bottom", type=int, default=2)
    w.add_argument("--blocks", type=int, default=2, help="N_b for block-diagonal")
    w.add_argument("--n-kappa", type=int, nargs="+", default=None,
                   help="functions per block (one value or one per block)")
    w.add_argument("--verify-file", help="verify this schedule file instead of emitting one")
    w.add_argument("-o", "--output", default=".")
    w.set_defaults(func=cmd_swapnet)

    r = sub.add_parser("lowrank", help="double factorization of stored DG pair tensors")
    r.add_argument("manifest", help="chain output directory or its manifest.json")
    r.add_argument("--outer-tol", type=float, nargs="+", default=[1e-8])
    r.add_argument("--inner-tol", type=float, default=1e-12)
    r.add_argument("--tau-index", type=int, default=0)
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_lowrank)

    g = sub.add_parser("config", help="print the effective configuration")
    g.add_argument("config", nargs="?")
    g.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "swapnet" and args.n_kappa is None:
        args.n_kappa = [2]
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
