"""Hot numeric kernels, each in a numba build and a pure-numpy build.

Two loops dominate solver runtime:

* the entropic coupling solver's outer mirror-descent / inner Sinkhorn
  iterations on small square cost matrices, and
* stage-A candidate scoring, which evaluates one least-squares forward
  error per feasible (row, measurement) pair each augmentation step.

The coupling core is written once in numba-compatible vectorized numpy and
compiled into a jitted twin, so both builds share one source of truth.  The
candidate scorer is a scalar loop under numba but needs a separately
vectorized formulation to be usable as interpreted numpy; the two are held
to agreement by tests.  Dispatch between builds follows `_accel.backend()`.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from ._accel import njit, use_numba

STATUS_OK = 0
STATUS_UNDERFLOW = 1

# Relative pivot floor below which the bordered-Cholesky score is numerically
# meaningless and the caller must fall back to a dense least-squares solve.
PIVOT_RTOL = 1e-10


def _gw_core(C1, C2, eps, outer_iters, sinkhorn_iters, tol, sinkhorn_tol):
    """Entropic coupling solver on square cost matrices C1 (source), C2 (target).

    Works with uniform probability marginals w = 1/s (row and column sums of
    the coupling are w).  Each outer step multiplies the current coupling by
    the exponentiated negative quadratic-cost gradient and Sinkhorn-projects
    back onto the marginals.  The whole update runs in the log domain: near
    convergence the coupling approaches a permutation and its off-support
    entries underflow any direct multiplicative scheme.  Tracks the
    best-cost iterate seen (including the uniform start) and returns it.

    Returns (coupling, outer_iterations_used, status).
    """
    s = C1.shape[0]
    w = 1.0 / s
    logw = np.log(w)
    T = np.full((s, s), w * w)
    logT = np.log(T)
    C2t = C2.T.copy()
    C1t = C1.T.copy()

    sq1 = C1 * C1
    sq2 = C2 * C2
    # gradient constants at exact uniform marginals
    u = (sq1.sum(axis=1) + sq1.sum(axis=0)) * w  # indexed by source row
    v = (sq2.sum(axis=1) + sq2.sum(axis=0)) * w  # indexed by target row
    c0 = (sq1.sum() + sq2.sum()) * (w * w)

    M1 = np.dot(np.dot(C1, T), C2t)
    best_T = T.copy()
    best_cost = c0 - 2.0 * (M1 * T).sum()
    status = STATUS_OK
    n_outer = 0
    for it in range(outer_iters):
        n_outer = it + 1
        M2 = np.dot(np.dot(C1t, T), C2)
        grad = u.reshape(s, 1) + v.reshape(1, s) - 2.0 * (M1 + M2)
        logK = logT - grad / eps
        alpha = np.zeros(s)
        beta = np.zeros(s)
        failed = False
        projected = False
        for _ in range(sinkhorn_iters):
            rows = logK + beta.reshape(1, s)
            rmax = np.empty(s)
            for i in range(s):
                rmax[i] = rows[i, :].max()
            if np.isinf(rmax).any():
                failed = True
                break
            alpha = logw - (np.log(np.exp(rows - rmax.reshape(s, 1)).sum(axis=1)) + rmax)
            cols = logK + alpha.reshape(s, 1)
            cmax = np.empty(s)
            for j in range(s):
                cmax[j] = cols[:, j].max()
            if np.isinf(cmax).any():
                failed = True
                break
            beta = logw - (np.log(np.exp(cols - cmax.reshape(1, s)).sum(axis=0)) + cmax)
            T_new = np.exp(logK + alpha.reshape(s, 1) + beta.reshape(1, s))
            dev = np.abs(T_new.sum(axis=1) - w).max()
            if dev <= sinkhorn_tol * w:
                projected = True
                break
        if failed:
            status = STATUS_UNDERFLOW
            break
        if not projected:
            # contested assignment: scaling stalled below the marginal
            # tolerance, so abandon refinement and keep the best feasible
            # iterate (the uniform start is always feasible)
            break

        logT_new = logK + alpha.reshape(s, 1) + beta.reshape(1, s)
        T_new = np.exp(logT_new)
        change = np.sqrt(((T_new - T) ** 2).sum()) / np.sqrt((T**2).sum())
        T = T_new
        logT = logT_new
        M1 = np.dot(np.dot(C1, T), C2t)
        cost = c0 - 2.0 * (M1 * T).sum()
        if cost < best_cost:
            best_cost = cost
            best_T = T.copy()
        if change < tol:
            break
    return best_T, n_outer, status


_gw_core_numba = njit(cache=True)(_gw_core)


def entropic_gw_core(C1, C2, eps, outer_iters, sinkhorn_iters, tol, sinkhorn_tol):
    """Backend-dispatching wrapper around the coupling solver core."""
    C1 = np.ascontiguousarray(C1, dtype=np.float64)
    C2 = np.ascontiguousarray(C2, dtype=np.float64)
    core = _gw_core_numba if use_numba() else _gw_core
    return core(
        C1, C2, float(eps), int(outer_iters), int(sinkhorn_iters), float(tol), float(sinkhorn_tol)
    )


def _score_loop(L, z1, U, BBt, bdiag, y, y_block_sorted, r, blocksorted, cand_p, cand_qv, out_err):
    """Forward errors for candidate (row p, measurement value y[q]) pairs.

    The current augmented system A x = ytilde (s rows, full row rank,
    underdetermined) is held through its Gram factor: L is the lower
    Cholesky factor of A A^T, z1 = L^-1 ytilde, U = B A^T, BBt = B B^T and
    bdiag its diagonal.  Appending row b_p and value y[q] borders the Gram
    matrix, so the minimum-norm solution of the augmented system costs one
    pair of triangular solves per candidate.  With blocksorted set, the
    residual against y is taken blockwise on sorted values (y_block_sorted
    holds each r-block of y pre-sorted).  Writes NaN where the border pivot
    collapses (candidate row numerically in the span of A).
    """
    s = L.shape[0]
    n = y.shape[0]
    nc = cand_p.shape[0]
    vbuf = np.empty(s)
    w1 = np.empty(s)
    pred = np.empty(n)
    for c in range(nc):
        p = cand_p[c]
        for i in range(s):
            acc = U[p, i]
            for k in range(i):
                acc -= L[i, k] * vbuf[k]
            vbuf[i] = acc / L[i, i]
        delta = bdiag[p]
        for i in range(s):
            delta -= vbuf[i] * vbuf[i]
        scale = bdiag[p] if bdiag[p] > 1.0 else 1.0
        if delta <= PIVOT_RTOL * scale:
            out_err[c] = np.nan
            continue
        dot_vz = 0.0
        for i in range(s):
            dot_vz += vbuf[i] * z1[i]
        w2 = (cand_qv[c] - dot_vz) / delta
        for i in range(s - 1, -1, -1):
            acc = z1[i] - vbuf[i] * w2
            for k in range(i + 1, s):
                acc -= L[k, i] * w1[k]
            w1[i] = acc / L[i, i]
        base = np.dot(U, w1)
        for t in range(n):
            pred[t] = base[t] + BBt[t, p] * w2
        acc_err = 0.0
        if blocksorted:
            for b0 in range(0, n, r):
                blk = np.sort(pred[b0 : b0 + r])
                for t in range(r):
                    diff = y_block_sorted[b0 + t] - blk[t]
                    acc_err += diff * diff
        else:
            for t in range(n):
                diff = y[t] - pred[t]
                acc_err += diff * diff
        out_err[c] = np.sqrt(acc_err)


_score_loop_numba = njit(cache=True)(_score_loop)


def _score_batch_numpy(L, z1, U, BBt, bdiag, y, y_block_sorted, r, blocksorted, cand_p, cand_qv):
    """Vectorized twin of _score_loop (all candidates in one BLAS batch)."""
    V = solve_triangular(L, U[cand_p].T, lower=True, check_finite=False)  # (s, nc)
    delta = bdiag[cand_p] - np.einsum("ij,ij->j", V, V)
    bad = delta <= PIVOT_RTOL * np.maximum(bdiag[cand_p], 1.0)
    delta = np.where(bad, 1.0, delta)
    w2 = (cand_qv - V.T @ z1) / delta
    W1 = solve_triangular(
        L, z1[:, None] - V * w2[None, :], lower=True, trans="T", check_finite=False
    )  # (s, nc)
    pred = U @ W1 + BBt[:, cand_p] * w2[None, :]
    if blocksorted:
        nb = y.shape[0] // r
        blocks = np.sort(pred.reshape(nb, r, -1), axis=1)
        diff = blocks - y_block_sorted.reshape(nb, r, 1)
        errs = np.sqrt(np.einsum("brc,brc->c", diff, diff))
    else:
        errs = np.linalg.norm(y[:, None] - pred, axis=0)
    errs[bad] = np.nan
    return errs


def block_sorted(y: np.ndarray, r: int) -> np.ndarray:
    """Each consecutive r-block of y sorted ascending, concatenated."""
    return np.sort(np.asarray(y, dtype=np.float64).reshape(-1, r), axis=1).ravel()


def score_candidates(L, z1, U, BBt, bdiag, y, y_block_sorted, r, blocksorted, cand_p, cand_qv):
    """Backend-dispatching candidate scorer; NaN marks pivot failures."""
    cand_p = np.ascontiguousarray(cand_p, dtype=np.int64)
    cand_qv = np.ascontiguousarray(cand_qv, dtype=np.float64)
    if cand_p.size == 0:
        return np.empty(0)
    if use_numba():
        out = np.empty(cand_p.shape[0])
        _score_loop_numba(
            np.ascontiguousarray(L),
            np.ascontiguousarray(z1),
            np.ascontiguousarray(U),
            BBt,
            np.ascontiguousarray(bdiag),
            np.ascontiguousarray(y),
            np.ascontiguousarray(y_block_sorted),
            r,
            blocksorted,
            cand_p,
            cand_qv,
            out,
        )
        return out
    return _score_batch_numpy(
        L, z1, U, BBt, bdiag, y, y_block_sorted, r, blocksorted, cand_p, cand_qv
    )
