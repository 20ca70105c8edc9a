"""Metrics, Monte Carlo harness, sweep configuration and result persistence.

A trial is (instance config, method): generate the instance from its seed,
run the method, score against ground truth.  Sweeps take the Cartesian
product of parameter grids times a number of repeated runs; every cell's
seed is derived from (base_seed, grid point, run index) through a seed
sequence, so cells are independent, methods see identical instances, and
any re-run reproduces the metric columns byte for byte.  Timing columns are
measured, not derived, and are excluded from determinism guarantees.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import perm as permmod
from .baselines import oracle_solve, rlocal_levsort, solve_with_permutation
from .gwalign import GwConfig, GwNumericalError
from .pipeline import depermute
from .stage_a import StageAConfig
from .svgplot import LineChart
from .synth import InstanceConfig, generate

SCHEMA_VERSION = "v1"
CSV_COLUMNS = [
    "schema",
    "method",
    "n",
    "d",
    "m",
    "r",
    "snr_db",
    "seed",
    "frac_hamming",
    "cov_error",
    "signal_error",
    "wall_ms",
    "failed",
]

METHODS = ("depermute", "levsort", "identity", "oracle")


@dataclass(frozen=True)
class TrialRecord:
    config: InstanceConfig
    method: str
    frac_hamming: float
    cov_error: float
    signal_error: float
    wall_ms: float
    failed: bool = False

    @property
    def seed(self) -> int:
        return self.config.seed


def trial_seed(base_seed: int, n: int, d: int, m: int, r: int, snr_db: float, run: int) -> int:
    """Stable 64-bit seed for one (grid cell, run); method-independent."""
    if math.isinf(snr_db):
        snr_key = 1 << 40
    else:
        snr_key = int(round(snr_db * 1000)) + (1 << 30)
    if snr_key < 0:
        raise ValueError(f"snr_db={snr_db} too negative to key")
    ss = np.random.SeedSequence([int(base_seed), n, d, m, r, snr_key, run])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def compute_metrics(inst, pi_hat, X_hat, Y_hat_cov) -> dict:
    """Score an estimate against the instance ground truth.

    Y_hat_cov is the estimate of the unpermuted observations whose Gram
    matrix enters the covariance error (the stage-A output for the pipeline,
    B @ X_hat for one-shot baselines).
    """
    C_star = inst.Y_clean @ inst.Y_clean.T
    C_hat = Y_hat_cov @ Y_hat_cov.T
    return {
        "frac_hamming": permmod.frac_hamming(inst.pi_star, pi_hat),
        "cov_error": float(
            np.linalg.norm(C_hat - C_star) / np.linalg.norm(C_star)
        ),
        "signal_error": float(
            np.linalg.norm(X_hat - inst.X_star) / np.linalg.norm(inst.X_star)
        ),
    }


def run_trial(
    cfg: InstanceConfig,
    method: str,
    cfg_a: StageAConfig | None = None,
    cfg_gw: GwConfig | None = None,
) -> TrialRecord:
    """Generate, solve, score one trial; numerical failures are recorded."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    inst = generate(cfg)
    t0 = time.perf_counter()
    try:
        if method == "depermute":
            sol = depermute(inst.B, inst.Y, cfg.r, cfg_a=cfg_a, cfg_gw=cfg_gw)
            pi_hat, X_hat, Y_cov = sol.pi_hat, sol.X_hat, sol.Y_hat
        elif method == "levsort":
            pi_hat = rlocal_levsort(inst.B, inst.Y, cfg.r)
            X_hat = solve_with_permutation(inst.B, inst.Y, pi_hat)
            Y_cov = inst.B @ X_hat
        elif method == "identity":
            pi_hat = permmod.RLocalPermutation.identity(cfg.n, cfg.r)
            X_hat = solve_with_permutation(inst.B, inst.Y, pi_hat)
            Y_cov = inst.B @ X_hat
        else:  # oracle
            pi_hat = inst.pi_star
            X_hat = oracle_solve(inst)
            Y_cov = inst.B @ X_hat
    except (GwNumericalError, np.linalg.LinAlgError):
        wall_ms = (time.perf_counter() - t0) * 1e3
        return TrialRecord(
            config=cfg,
            method=method,
            frac_hamming=math.nan,
            cov_error=math.nan,
            signal_error=math.nan,
            wall_ms=wall_ms,
            failed=True,
        )
    wall_ms = (time.perf_counter() - t0) * 1e3
    metrics = compute_metrics(inst, pi_hat, X_hat, Y_cov)
    if not (0.0 <= metrics["frac_hamming"] <= 1.0):
        raise RuntimeError(f"distortion out of range: {metrics['frac_hamming']}")
    for key in ("cov_error", "signal_error"):
        if not (math.isfinite(metrics[key]) and metrics[key] >= 0.0):
            raise RuntimeError(f"{key} not finite and nonnegative: {metrics[key]}")
    return TrialRecord(config=cfg, method=method, wall_ms=wall_ms, **metrics)


@dataclass
class SweepSpec:
    """Grid of benchmark cells: n is given as multiples of r."""

    d: int
    n_over_r: list[int]
    r: list[int]
    m: list[int]
    snr_db: list[float]
    methods: list[str] = field(default_factory=lambda: ["depermute"])
    runs: int = 25
    base_seed: int = 0

    def __post_init__(self):
        if not (self.n_over_r and self.r and self.m and self.snr_db and self.methods):
            raise ValueError("all sweep grids must be nonempty")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.base_seed < 0:
            raise ValueError("base_seed must be nonnegative")
        for method in self.methods:
            if method not in METHODS:
                raise ValueError(f"unknown method {method!r}")
        for mult in self.n_over_r:
            for r in self.r:
                if mult * r < self.d:
                    raise ValueError(f"n = {mult}*{r} < d = {self.d}")

    def trials(self) -> list[tuple[InstanceConfig, str]]:
        """All (config, method) cells in deterministic order."""
        out = []
        for r in sorted(self.r):
            for mult in sorted(self.n_over_r):
                for m in sorted(self.m):
                    for snr in sorted(self.snr_db):
                        for run in range(self.runs):
                            seed = trial_seed(self.base_seed, mult * r, self.d, m, r, snr, run)
                            cfg = InstanceConfig(
                                n=mult * r, d=self.d, m=m, r=r, snr_db=snr, seed=seed
                            )
                            for method in self.methods:
                                out.append((cfg, method))
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "d": self.d,
                "n_over_r": self.n_over_r,
                "r": self.r,
                "m": self.m,
                "snr_db": [None if math.isinf(s) else s for s in self.snr_db],
                "methods": self.methods,
                "runs": self.runs,
                "base_seed": self.base_seed,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "SweepSpec":
        obj = json.loads(text)
        return cls(
            d=obj["d"],
            n_over_r=list(obj["n_over_r"]),
            r=list(obj["r"]),
            m=list(obj["m"]),
            snr_db=[math.inf if s is None else float(s) for s in obj["snr_db"]],
            methods=list(obj.get("methods", ["depermute"])),
            runs=int(obj.get("runs", 25)),
            base_seed=int(obj.get("base_seed", 0)),
        )


def run_sweep(
    spec: SweepSpec,
    cfg_a: StageAConfig | None = None,
    cfg_gw: GwConfig | None = None,
    threads: int = 1,
    out_path=None,
    progress=None,
) -> list[TrialRecord]:
    """Run every cell of the sweep; stream rows to out_path in grid order.

    Worker parallelism never changes output content: records are emitted in
    the deterministic trial order however they complete.
    """
    trials = spec.trials()
    results: dict[int, TrialRecord] = {}
    writer = _StreamWriter(out_path) if out_path else None
    next_flush = 0

    def flush():
        nonlocal next_flush
        while next_flush in results:
            if writer:
                writer.write(results[next_flush])
            if progress:
                progress(next_flush + 1, len(trials))
            next_flush += 1

    if threads <= 1:
        for i, (cfg, method) in enumerate(trials):
            results[i] = run_trial(cfg, method, cfg_a, cfg_gw)
            flush()
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(run_trial, cfg, method, cfg_a, cfg_gw)
                for cfg, method in trials
            ]
            for i, fut in enumerate(futures):
                results[i] = fut.result()
                flush()
    flush()
    if writer:
        writer.close()
    return [results[i] for i in range(len(trials))]


class _StreamWriter:
    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.fh = open(self.path, "w", newline="")
        self.writer = csv.writer(self.fh)
        self.writer.writerow(CSV_COLUMNS)

    def write(self, rec: TrialRecord):
        self.writer.writerow(record_row(rec))
        self.fh.flush()

    def close(self):
        self.fh.close()


def record_row(rec: TrialRecord) -> list[str]:
    cfg = rec.config
    return [
        SCHEMA_VERSION,
        rec.method,
        str(cfg.n),
        str(cfg.d),
        str(cfg.m),
        str(cfg.r),
        "inf" if math.isinf(cfg.snr_db) else repr(cfg.snr_db),
        str(cfg.seed),
        repr(rec.frac_hamming),
        repr(rec.cov_error),
        repr(rec.signal_error),
        repr(rec.wall_ms),
        str(rec.failed),
    ]


def write_records_csv(records, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(record_row(rec))
    return path


def records_csv_text(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(record_row(rec))
    return buf.getvalue()


_GROUP_KEYS = ("method", "n", "d", "m", "r", "snr_db")
_METRICS = ("frac_hamming", "cov_error", "signal_error", "wall_ms")


def summarize(records) -> list[dict]:
    """Group records by cell; mean and standard error per metric.

    Failed trials count toward n_failed and are excluded from the stats.
    Rows are ordered by (r, n, m, method, snr_db, d).
    """
    if not records:
        raise ValueError("no records to summarize")
    groups: dict[tuple, list[TrialRecord]] = {}
    for rec in records:
        cfg = rec.config
        key = (rec.method, cfg.n, cfg.d, cfg.m, cfg.r, cfg.snr_db)
        groups.setdefault(key, []).append(rec)
    rows = []
    for key, recs in groups.items():
        row = dict(zip(_GROUP_KEYS, key))
        ok = [r for r in recs if not r.failed]
        row["n_runs"] = len(recs)
        row["n_failed"] = len(recs) - len(ok)
        for metric in _METRICS:
            vals = np.array([getattr(r, metric) for r in ok])
            if vals.size:
                row[f"{metric}_mean"] = float(vals.mean())
                row[f"{metric}_stderr"] = (
                    float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
                )
            else:
                row[f"{metric}_mean"] = math.nan
                row[f"{metric}_stderr"] = math.nan
        rows.append(row)
    rows.sort(key=lambda r: (r["r"], r["n"], r["m"], r["method"], r["snr_db"], r["d"]))
    return rows


def write_summary_csv(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = list(_GROUP_KEYS) + ["n_runs", "n_failed"] + [
        f"{m}_{s}" for m in _METRICS for s in ("mean", "stderr")
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([row[c] for c in cols])
    return path


def write_summary_json(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(rows, indent=2, default=float))
    return path


def plot_distortion_vs_n(rows, out_path, series_key="m", title=None):
    """Fig-style curve: mean distortion against n, one curve per series."""
    rows = [r for r in rows if not math.isnan(r["frac_hamming_mean"])]
    values = sorted({r[series_key] for r in rows})
    chart = LineChart(
        title=title or "distortion vs measurements",
        xlabel="n",
        ylabel="mean fractional Hamming distortion",
    )
    for v in values:
        pts = sorted((r["n"], r) for r in rows if r[series_key] == v)
        chart.add(
            f"{series_key}={v}",
            [n for n, _ in pts],
            [r["frac_hamming_mean"] for _, r in pts],
            [r["frac_hamming_stderr"] for _, r in pts],
        )
    return chart.write(out_path)


def plot_cov_error_vs_m(rows, out_path, series_key="r", title=None):
    """Fig-style curve: mean covariance error against the view count."""
    rows = [r for r in rows if not math.isnan(r["cov_error_mean"])]
    values = sorted({r[series_key] for r in rows})
    chart = LineChart(
        title=title or "covariance error vs views",
        xlabel="m",
        ylabel="mean normalized covariance error",
    )
    for v in values:
        pts = sorted((r["m"], r) for r in rows if r[series_key] == v)
        chart.add(
            f"{series_key}={v}",
            [m for m, _ in pts],
            [r["cov_error_mean"] for _, r in pts],
            [r["cov_error_stderr"] for _, r in pts],
        )
    return chart.write(out_path)


def reproduce_specs(name: str, full: bool, runs: int | None = None, base_seed: int = 0):
    """Named benchmark grids behind the figure-reproduction commands.

    Desk-scale grids finish on a laptop; --full switches to the d=64 grids
    (r in {7..10}, n in {48r..60r}, m in {8,32} for the distortion figure).
    The source does not publish numeric tables for these figures, so the
    full runs are documentation-grade output, not a test gate.
    """
    if runs is not None and runs < 1:
        raise ValueError("runs must be >= 1")
    specs: dict[str, SweepSpec] = {}
    if name == "fig5":
        if full:
            specs["fig5"] = SweepSpec(
                d=64, n_over_r=[52], r=[4, 5, 8, 10], m=[2, 4, 8, 16, 32],
                snr_db=[30.0], methods=["depermute"],
            )
        else:
            specs["fig5"] = SweepSpec(
                d=32, n_over_r=[28], r=[8], m=[4, 8, 16, 32],
                snr_db=[30.0], methods=["depermute"],
            )
    elif name == "fig6":
        if full:
            specs["fig6_views"] = SweepSpec(
                d=64, n_over_r=[48, 52, 56, 60], r=[7, 8, 9, 10], m=[8, 32],
                snr_db=[30.0], methods=["depermute"],
            )
            specs["fig6_levsort"] = SweepSpec(
                d=64, n_over_r=[48, 52, 56, 60], r=[11, 12, 13, 14], m=[64],
                snr_db=[30.0], methods=["depermute", "levsort"],
            )
        else:
            specs["fig6_views"] = SweepSpec(
                d=32, n_over_r=[24, 26, 28, 30], r=[8], m=[8, 32],
                snr_db=[30.0], methods=["depermute"],
            )
            specs["fig6_levsort"] = SweepSpec(
                d=32, n_over_r=[24, 28], r=[12], m=[32],
                snr_db=[30.0], methods=["depermute", "levsort"],
            )
    else:
        raise ValueError(f"unknown figure {name!r}; expected fig5 or fig6")
    for key, spec in specs.items():
        spec.base_seed = base_seed
        if runs is not None:
            spec.runs = runs
    return specs
