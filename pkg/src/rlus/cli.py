"""Command line interface: generate / solve / sweep / reproduce.

Trace verbosity comes from the RLUS_LOG environment variable (debug, info,
warning, ...); kernel backend selection from RLUS_BACKEND (auto, numba,
numpy).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import bench, storage
from .gwalign import GwConfig
from .pipeline import depermute
from .stage_a import StageAConfig
from .synth import InstanceConfig, generate


def _configure_logging():
    level_name = os.environ.get("RLUS_LOG", "").strip().lower()
    if not level_name:
        return
    level = {
        "trace": logging.DEBUG,
        "debug": logging.DEBUG,
        "info": logging.INFO,
        "warning": logging.WARNING,
        "error": logging.ERROR,
    }.get(level_name)
    if level is None:
        raise SystemExit(f"unknown RLUS_LOG={level_name!r}")
    logging.basicConfig(level=level, format="%(name)s %(message)s", stream=sys.stderr)


def _add_solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--epsilon", type=float, default=None, help="entropic regularization weight")
    p.add_argument(
        "--epsilon-absolute",
        action="store_true",
        help="treat --epsilon as absolute instead of relative to the cost spread",
    )
    p.add_argument("--outer-iters", type=int, default=None)
    p.add_argument("--sinkhorn-iters", type=int, default=None)
    p.add_argument(
        "--cost-kind", choices=["gram", "sqeuclidean"], default=None, help="stage-B cost matrices"
    )
    p.add_argument(
        "--candidate-mode",
        choices=["rank", "cross"],
        default=None,
        help="stage-A candidate pairing (sorted ranks or full cross product)",
    )
    p.add_argument("--max-augmentations", type=int, default=None)
    p.add_argument("--refine-rounds", type=int, default=0)


def _solver_configs(args) -> tuple[StageAConfig, GwConfig]:
    cfg_a = StageAConfig()
    if args.candidate_mode is not None:
        cfg_a.candidate_mode = args.candidate_mode
    if args.max_augmentations is not None:
        cfg_a.max_augmentations = args.max_augmentations
    gw_kwargs = {}
    if args.epsilon is not None:
        gw_kwargs["epsilon"] = args.epsilon
    if args.epsilon_absolute:
        gw_kwargs["epsilon_absolute"] = True
    if args.outer_iters is not None:
        gw_kwargs["outer_iters"] = args.outer_iters
    if args.sinkhorn_iters is not None:
        gw_kwargs["sinkhorn_iters"] = args.sinkhorn_iters
    if args.cost_kind is not None:
        gw_kwargs["cost_kind"] = args.cost_kind
    return cfg_a, GwConfig(**gw_kwargs)


def cmd_generate(args) -> int:
    snr = math.inf if args.snr_db is None else args.snr_db
    cfg = InstanceConfig(n=args.n, d=args.d, m=args.m, r=args.r, snr_db=snr, seed=args.seed)
    inst = generate(cfg)
    out = storage.save_instance(inst, args.out)
    print(f"wrote instance to {out}")
    return 0


def cmd_solve(args) -> int:
    inst = storage.load_instance(args.in_dir)
    cfg_a, cfg_gw = _solver_configs(args)
    if args.method == "depermute":
        sol = depermute(
            inst.B, inst.Y, inst.config.r, cfg_a=cfg_a, cfg_gw=cfg_gw,
            refine_rounds=args.refine_rounds,
        )
        pi_hat, X_hat, Y_cov = sol.pi_hat, sol.X_hat, sol.Y_hat
        diagnostics = sol.diagnostics
    else:
        from .baselines import rlocal_levsort, solve_with_permutation
        from .perm import RLocalPermutation

        if args.method == "levsort":
            pi_hat = rlocal_levsort(inst.B, inst.Y, inst.config.r)
        elif args.method == "identity":
            pi_hat = RLocalPermutation.identity(inst.config.n, inst.config.r)
        else:
            pi_hat = inst.pi_star
        X_hat = solve_with_permutation(inst.B, inst.Y, pi_hat)
        Y_cov = inst.B @ X_hat
        diagnostics = {}
    metrics = bench.compute_metrics(inst, pi_hat, X_hat, Y_cov)

    from .pipeline import Solution

    sol_out = Solution(pi_hat=pi_hat, X_hat=X_hat, Y_hat=Y_cov, diagnostics=diagnostics)
    storage.save_solution(sol_out, args.out)
    doc = json.loads(Path(args.out).read_text())
    doc["method"] = args.method
    doc["metrics"] = metrics
    Path(args.out).write_text(json.dumps(doc, indent=2, default=float))
    print(json.dumps({"method": args.method, **metrics}, indent=2))
    return 0


def cmd_sweep(args) -> int:
    spec = bench.SweepSpec.from_json(Path(args.spec).read_text())
    cfg_a, cfg_gw = _solver_configs(args)
    progress = _progress_printer() if args.progress else None
    records = bench.run_sweep(
        spec, cfg_a=cfg_a, cfg_gw=cfg_gw, threads=args.threads,
        out_path=args.out, progress=progress,
    )
    rows = bench.summarize(records)
    if args.summary_out:
        bench.write_summary_csv(rows, args.summary_out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_reproduce(args) -> int:
    specs = bench.reproduce_specs(args.figure, args.full, runs=args.runs, base_seed=args.base_seed)
    out_dir = Path(args.out)
    if args.dry_run:
        for name, spec in specs.items():
            trials = spec.trials()
            print(f"{name}: {spec.to_json()}")
            print(f"{name}: {len(trials)} trials")
        return 0
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_a, cfg_gw = _solver_configs(args)
    progress = _progress_printer() if args.progress else None
    for name, spec in specs.items():
        records = bench.run_sweep(
            spec, cfg_a=cfg_a, cfg_gw=cfg_gw, threads=args.threads,
            out_path=out_dir / f"{name}.csv", progress=progress,
        )
        rows = bench.summarize(records)
        bench.write_summary_csv(rows, out_dir / f"{name}_summary.csv")
        bench.write_summary_json(rows, out_dir / f"{name}_summary.json")
        if name.startswith("fig5"):
            bench.plot_cov_error_vs_m(rows, out_dir / f"{name}.svg", title=name)
        else:
            for r in sorted({row["r"] for row in rows}):
                sub = [row for row in rows if row["r"] == r]
                series = "method" if len({row["method"] for row in sub}) > 1 else "m"
                bench.plot_distortion_vs_n(
                    sub, out_dir / f"{name}_r{r}.svg", series_key=series, title=f"{name} r={r}"
                )
        print(f"{name}: {len(records)} trials -> {out_dir}")
    return 0


def _progress_printer():
    def report(done, total):
        print(f"\r{done}/{total} trials", end="" if done < total else "\n", file=sys.stderr)

    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rlus",
        description="r-local unlabeled sensing: solvers and benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize an instance directory")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--snr-db", type=float, default=None, help="omit for noiseless")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("solve", help="solve a stored instance")
    p.add_argument("--in", dest="in_dir", required=True, metavar="DIR")
    p.add_argument("--method", choices=list(bench.METHODS), default="depermute")
    p.add_argument("--out", required=True, metavar="FILE.json")
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("sweep", help="run a Monte Carlo sweep from a JSON spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True, metavar="results.csv")
    p.add_argument("--summary-out", default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--progress", action="store_true")
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("reproduce", help="run the built-in figure grids")
    p.add_argument("figure", choices=["fig5", "fig6"])
    p.add_argument("--full", action="store_true", help="paper-scale grid (d=64)")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--progress", action="store_true")
    p.add_argument("--dry-run", action="store_true", help="print the grids without running")
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
