"""End-to-end solver: stage-A over all views, stage-B assembly, final solve.

Stage A denoises every view independently from the collapsed
initialization; stage B aligns the per-block covariance structure of the
stacked estimate to the observations.  By default two refinement rounds
follow: the permutation estimate unscrambles the observations, a robust
(trimmed, then Huber-reweighted) least-squares refit produces a much better
signal estimate than stage A's square solve, which is ill-conditioned when
n/r approaches d, and stage B realigns against the refit.  The robustness
matters because residual permutation errors act as gross outliers in the
unscrambled rows; a plain refit inherits them.  The returned X_hat is
always the exact least-squares solve for the final permutation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import perm as permmod
from .collapse import min_norm_solve
from .gwalign import GwConfig, stage_b
from .perm import RLocalPermutation, _check_divides
from .stage_a import StageAConfig, make_shared, run_stage_a


@dataclass
class Solution:
    pi_hat: RLocalPermutation
    X_hat: np.ndarray
    Y_hat: np.ndarray  # stage-A estimate of the unpermuted observations
    diagnostics: dict


def robust_refit(B: np.ndarray, Y_unscrambled: np.ndarray, iters: int = 8) -> np.ndarray:
    """Outlier-tolerant least squares of B X ~ Y_unscrambled.

    Two trimmed warm-start passes (fit each view on its 60% best-explained
    rows) followed by Huber-reweighted iterations with a MAD scale.  Rows
    carrying a wrong measurement after de-permutation are gross outliers,
    so a plain solve would drag the fit; trimming survives up to ~40% of
    them.
    """
    X = min_norm_solve(B, Y_unscrambled)
    n = B.shape[0]
    scale_floor = 1e-12 * (np.abs(Y_unscrambled).max() + 1.0)
    for it in range(iters):
        R = Y_unscrambled - B @ X
        if it < 2:
            X_new = np.empty_like(X)
            for j in range(Y_unscrambled.shape[1]):
                keep = np.argsort(np.abs(R[:, j]))[: max(int(0.6 * n), B.shape[1])]
                X_new[:, j] = min_norm_solve(B[keep], Y_unscrambled[keep, j])
            X = X_new
            continue
        s = 1.4826 * float(np.median(np.abs(R)))
        if s < scale_floor:
            break
        w = np.minimum(1.0, 1.345 * s / np.maximum(np.abs(R), scale_floor))
        X_new = np.empty_like(X)
        for j in range(Y_unscrambled.shape[1]):
            sw = np.sqrt(w[:, j])
            X_new[:, j] = min_norm_solve(B * sw[:, None], Y_unscrambled[:, j] * sw)
        X = X_new
    return X


def depermute(
    B: np.ndarray,
    Y: np.ndarray,
    r: int,
    cfg_a: StageAConfig | None = None,
    cfg_gw: GwConfig | None = None,
    refine_rounds: int = 2,
) -> Solution:
    """Estimate the r-local permutation and the signal from (B, Y, r).

    The returned permutation is oriented so that Y ~ apply(pi_hat, B @ X_hat);
    X_hat is exactly the minimum-norm least-squares solve for that choice.
    Refinement stops early when the permutation estimate stops changing.
    """
    B = np.asarray(B, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d = B.shape
    if Y.shape[0] != n:
        raise ValueError(f"B has {n} rows but Y has {Y.shape[0]}")
    if n < d:
        raise ValueError(f"need n >= d, got n={n}, d={d}")
    _check_divides(n, r)
    cfg_a = cfg_a or StageAConfig()
    cfg_gw = cfg_gw or GwConfig()

    t0 = time.perf_counter()
    shared = make_shared(B, r)
    Y_hat = np.empty_like(Y)
    view_diags = []
    for j in range(Y.shape[1]):
        res = run_stage_a(B, Y[:, j], r, cfg_a, shared=shared)
        Y_hat[:, j] = res.y_hat
        view_diags.append(
            {"view": j, "matched": [list(pq) for pq in res.matched], "trace": res.trace}
        )
    t1 = time.perf_counter()

    block_trace: list[dict] = []
    pi_hat = stage_b(Y_hat, Y, r, cfg_gw, trace=block_trace)
    rounds_run = 0
    for _ in range(refine_rounds):
        X_fit = robust_refit(B, permmod.apply(pi_hat.inverse(), Y))
        refined_trace: list[dict] = []
        pi_next = stage_b(B @ X_fit, Y, r, cfg_gw, trace=refined_trace)
        rounds_run += 1
        changed = pi_next != pi_hat
        pi_hat = pi_next
        block_trace = refined_trace
        if not changed:
            break
    X_hat = min_norm_solve(B, permmod.apply(pi_hat.inverse(), Y))
    t2 = time.perf_counter()

    diagnostics = {
        "stage_a": view_diags,
        "stage_b": block_trace,
        "refine_rounds_run": rounds_run,
        "timings": {
            "stage_a_s": t1 - t0,
            "stage_b_s": t2 - t1,
            "total_s": t2 - t0,
        },
    }
    return Solution(pi_hat=pi_hat, X_hat=X_hat, Y_hat=Y_hat, diagnostics=diagnostics)
