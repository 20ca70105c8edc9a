"""Stage A: greedy augmentation of the collapsed system, one view at a time.

The collapsed system has n/r labeled equations; when the signal dimension d
exceeds n/r it is underdetermined.  Each iteration adds one (measurement
vector, measurement) pair: within every active block the current estimate
and the observed view are sorted over their feasible indices and paired by
rank, each candidate pair is scored by the forward error of the augmented
least-squares solve, and the globally best pair is appended.  Matched
indices leave the feasible sets; a block whose feasible set drops to one
index is retired.  After d - n/r augmentations the system is square and the
de-noised estimate of the view is returned.

Rank pairing is justified by the one-dimensional alignment fact that, for
sorted sequences, the best assignment between squared-difference structures
is the identity or the anti-identity; only ascending-ascending pairs are
generated here and the forward-error selection weeds out anti-aligned
blocks.  `one_dim_qap_objective` and `rank_match_maps` expose that
restricted alignment problem for verification.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import _kernels
from .collapse import collapse, min_norm_solve
from .perm import _check_divides

logger = logging.getLogger("rlus.stage_a")

RANK_MATCHED = "rank"
CROSS_PRODUCT = "cross"

RESIDUAL_BLOCKSORTED = "blocksorted"
RESIDUAL_PLAIN = "plain"


@dataclass
class StageAConfig:
    max_augmentations: int | None = None  # default d - n/r
    candidate_mode: str = RANK_MATCHED
    # candidate selection metric: the plain norm ||y - B x|| compares the
    # permuted observation against the unpermuted estimate, so while the
    # system is underdetermined it rewards explaining the observed order
    # (identity-style pairings) rather than the true correspondence; sorting
    # each block first makes the metric invariant to the very permutation
    # being estimated and zero at the true solution
    residual: str = RESIDUAL_BLOCKSORTED
    trace: bool = False

    def __post_init__(self):
        if self.candidate_mode not in (RANK_MATCHED, CROSS_PRODUCT):
            raise ValueError(f"unknown candidate_mode {self.candidate_mode!r}")
        if self.residual not in (RESIDUAL_BLOCKSORTED, RESIDUAL_PLAIN):
            raise ValueError(f"unknown residual metric {self.residual!r}")


@dataclass
class AugmentedSystem:
    """The growing labeled system plus feasible index bookkeeping.

    P holds unmatched row indices of B, Q unmatched measurement indices of
    the view, K the blocks still eligible for matching (at least two
    feasible indices).  B_aug stacks the n/r collapsed rows and one row of B
    per matched pair.
    """

    B_aug: np.ndarray
    y_aug: np.ndarray
    P: set[int]
    Q: set[int]
    K: set[int]
    matched: list[tuple[int, int]] = field(default_factory=list)
    r: int = 1

    @classmethod
    def from_collapse(cls, B: np.ndarray, y: np.ndarray, r: int) -> "AugmentedSystem":
        cs = collapse(B, y, r)
        n = B.shape[0]
        blocks = set(range(n // r)) if r >= 2 else set()
        return cls(
            B_aug=cs.B_tilde,
            y_aug=np.asarray(cs.Y_tilde, dtype=np.float64).ravel(),
            P=set(range(n)),
            Q=set(range(n)),
            K=blocks,
            r=r,
        )

    def append(self, B: np.ndarray, y: np.ndarray, p: int, q: int) -> None:
        if p not in self.P or q not in self.Q:
            raise ValueError(f"pair ({p}, {q}) not feasible")
        k = p // self.r
        if q // self.r != k:
            raise ValueError(f"pair ({p}, {q}) does not share a block")
        self.B_aug = np.vstack([self.B_aug, B[p]])
        self.y_aug = np.append(self.y_aug, y[q])
        self.P.discard(p)
        self.Q.discard(q)
        self.matched.append((p, q))
        remaining = sum(1 for i in range(k * self.r, (k + 1) * self.r) if i in self.P)
        if remaining <= 1:
            self.K.discard(k)


@dataclass
class StageAResult:
    y_hat: np.ndarray
    x_hat: np.ndarray
    matched: list[tuple[int, int]]
    trace: list[dict]


@dataclass(frozen=True)
class StageAShared:
    """Per-B precomputations reused across views (Gram blocks for scoring)."""

    BBt: np.ndarray
    bdiag: np.ndarray
    U0: np.ndarray  # B @ B_tilde^T
    G0: np.ndarray  # B_tilde @ B_tilde^T


def make_shared(B: np.ndarray, r: int) -> StageAShared:
    B = np.asarray(B, dtype=np.float64)
    B_tilde = collapse(B, np.zeros(B.shape[0]), r).B_tilde
    BBt = B @ B.T
    return StageAShared(
        BBt=BBt,
        bdiag=np.ascontiguousarray(np.diag(BBt)),
        U0=B @ B_tilde.T,
        G0=B_tilde @ B_tilde.T,
    )


def block_sort_indices(v: np.ndarray, active: set[int], r: int, k: int) -> list[int]:
    """Feasible indices of block k ordered by ascending v, ties by index."""
    n = np.asarray(v).shape[0]
    if not (0 <= k < n // r):
        raise ValueError(f"block {k} out of range for n={n}, r={r}")
    idx = [i for i in range(k * r, (k + 1) * r) if i in active]
    idx.sort(key=lambda i: (v[i], i))
    return idx


def candidate_pairs(ps: list[int], qs: list[int], mode: str = RANK_MATCHED):
    """Candidate (p, q) pairs from two sorted feasible index lists."""
    if mode == RANK_MATCHED:
        if len(ps) != len(qs):
            raise RuntimeError(
                f"feasible sets out of lockstep: {len(ps)} rows vs {len(qs)} measurements"
            )
        return list(zip(ps, qs))
    if mode == CROSS_PRODUCT:
        return list(itertools.product(ps, qs))
    raise ValueError(f"unknown candidate mode {mode!r}")


def forward_error(
    B: np.ndarray, y_j: np.ndarray, aug: AugmentedSystem, p: int, q: int
) -> tuple[float, np.ndarray]:
    """Reference scorer: pseudoinverse solve of the system augmented by (p, q).

    Returns the forward error ||y_j - B x|| and the candidate solution x.
    """
    if p not in aug.P:
        raise ValueError(f"row {p} not feasible")
    if q not in aug.Q:
        raise ValueError(f"measurement {q} not feasible")
    if p // aug.r != q // aug.r:
        raise ValueError(f"pair ({p}, {q}) does not share a block")
    A = np.vstack([aug.B_aug, B[p]])
    b = np.append(aug.y_aug, y_j[q])
    x = min_norm_solve(A, b)
    return float(np.linalg.norm(y_j - B @ x)), x


def selection_residual(y_j: np.ndarray, y_pred: np.ndarray, r: int, residual: str) -> float:
    """The metric run_stage_a minimizes over candidate pairs."""
    if residual == RESIDUAL_PLAIN:
        return float(np.linalg.norm(y_j - y_pred))
    return float(
        np.linalg.norm(_kernels.block_sorted(y_j, r) - _kernels.block_sorted(y_pred, r))
    )


def _reference_scores(B, y_j, aug, cand, r, residual):
    """Per-candidate pseudoinverse solves, scored by the selection metric."""
    errs = np.empty(len(cand))
    for i, (_, p, q) in enumerate(cand):
        A = np.vstack([aug.B_aug, B[p]])
        b = np.append(aug.y_aug, y_j[q])
        x = min_norm_solve(A, b)
        errs[i] = selection_residual(y_j, B @ x, r, residual)
    return errs


def _score_iteration(B, y_j, y_sorted, aug, cand, cfg, shared, U, G, r):
    """Score all candidates of one iteration, preferring the Gram fast path."""
    errs = None
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        L = None
    if L is not None and aug.B_aug.shape[0] < B.shape[1]:
        z1 = solve_triangular(L, aug.y_aug, lower=True, check_finite=False)
        cand_p = np.array([p for _, p, _ in cand], dtype=np.int64)
        cand_qv = np.array([y_j[q] for _, _, q in cand])
        errs = _kernels.score_candidates(
            L, z1, U, shared.BBt, shared.bdiag, y_j, y_sorted, r,
            cfg.residual == RESIDUAL_BLOCKSORTED, cand_p, cand_qv,
        )
    bad = np.flatnonzero(~np.isfinite(errs)) if errs is not None else range(len(cand))
    if errs is None:
        errs = np.empty(len(cand))
    for i in bad:
        _, p, q = cand[i]
        A = np.vstack([aug.B_aug, B[p]])
        b = np.append(aug.y_aug, y_j[q])
        x = min_norm_solve(A, b)
        errs[i] = selection_residual(y_j, B @ x, r, cfg.residual)
    return errs


def run_stage_a(
    B: np.ndarray,
    y_j: np.ndarray,
    r: int,
    cfg: StageAConfig | None = None,
    shared: StageAShared | None = None,
) -> StageAResult:
    """Greedy augmentation for one view; returns the de-noised estimate.

    With n/r >= d no augmentation happens and the collapsed solve is
    returned directly.
    """
    cfg = cfg or StageAConfig()
    B = np.asarray(B, dtype=np.float64)
    y_j = np.asarray(y_j, dtype=np.float64).ravel()
    n, d = B.shape
    _check_divides(n, r)
    if y_j.shape[0] != n:
        raise ValueError(f"view has {y_j.shape[0]} entries, B has {n} rows")
    n_r = n // r

    aug = AugmentedSystem.from_collapse(B, y_j, r)
    max_aug = cfg.max_augmentations
    if max_aug is None:
        max_aug = max(0, d - n_r)
    if not (0 <= max_aug <= n - n_r):
        raise ValueError(f"max_augmentations={max_aug} outside [0, {n - n_r}]")

    x_hat = min_norm_solve(aug.B_aug, aug.y_aug)
    y_hat = B @ x_hat
    trace: list[dict] = []

    if max_aug == 0 or not aug.K:
        return StageAResult(y_hat=y_hat, x_hat=x_hat, matched=aug.matched, trace=trace)

    shared = shared or make_shared(B, r)
    U = shared.U0.copy()
    G = shared.G0.copy()
    y_sorted = _kernels.block_sorted(y_j, r)

    for t in range(max_aug):
        if not aug.K:
            break
        cand = []
        for k in sorted(aug.K):
            ps = block_sort_indices(y_hat, aug.P, r, k)
            qs = block_sort_indices(y_j, aug.Q, r, k)
            for p, q in candidate_pairs(ps, qs, cfg.candidate_mode):
                cand.append((k, p, q))
        if not cand:
            break
        errs = _score_iteration(B, y_j, y_sorted, aug, cand, cfg, shared, U, G, r)
        best = min(range(len(cand)), key=lambda i: (errs[i], cand[i][0], cand[i][1]))
        k_star, p_star, q_star = cand[best]

        # grow the Gram bookkeeping before mutating the system
        g_new = np.append(U[p_star], shared.bdiag[p_star])
        G = np.block([[G, g_new[:-1, None]], [g_new[None, :]]])
        U = np.hstack([U, shared.BBt[:, p_star : p_star + 1]])

        aug.append(B, y_j, p_star, q_star)
        x_hat = min_norm_solve(aug.B_aug, aug.y_aug)
        y_hat = B @ x_hat
        if cfg.trace or logger.isEnabledFor(logging.DEBUG):
            entry = {
                "t": t + 1,
                "k": int(k_star),
                "p": int(p_star),
                "q": int(q_star),
                "forward_error": float(errs[best]),
            }
            if cfg.trace:
                trace.append(entry)
            logger.debug(json.dumps(entry))

    return StageAResult(y_hat=y_hat, x_hat=x_hat, matched=aug.matched, trace=trace)


def one_dim_qap_objective(a: np.ndarray, b: np.ndarray, sigma) -> float:
    """Alignment objective for scalar sequences under assignment sigma.

    Value is -sum_{p,q} (a_p - a_q)^2 (b_{sigma(p)} - b_{sigma(q)})^2; lower
    is a better alignment of the two squared-difference structures.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    sig = np.asarray(sigma, dtype=np.int64)
    da = a[:, None] - a[None, :]
    bs = b[sig]
    db = bs[:, None] - bs[None, :]
    return float(-np.sum(da**2 * db**2))


def rank_match_maps(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending-ascending and ascending-descending rank alignments a -> b."""
    a = np.asarray(a)
    b = np.asarray(b)
    ia = np.argsort(a, kind="stable")
    ib = np.argsort(b, kind="stable")
    up = np.empty(len(a), dtype=np.int64)
    down = np.empty(len(a), dtype=np.int64)
    up[ia] = ib
    down[ia] = ib[::-1]
    return up, down
