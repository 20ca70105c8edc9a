"""Permutation-invariant collapsed system.

Summing the rows of each size-r block kills the unknown block permutation
(a block permutation reorders the summands only), leaving n/r labeled
equations on X: row k of B_tilde is the column sum of block k of B, and the
same for Y_tilde from Y.  The collapsed solve seeds the whole pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .perm import _check_divides


@dataclass(frozen=True)
class CollapsedSystem:
    B_tilde: np.ndarray  # (n/r, d)
    Y_tilde: np.ndarray  # (n/r, m) or (n/r,)


def min_norm_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution via SVD.

    Rank tolerance is max(dim) * machine-eps * sigma_max, robust to
    near-rank-deficient inputs.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    rcond = max(A.shape) * np.finfo(np.float64).eps
    x, *_ = np.linalg.lstsq(A, b, rcond=rcond)
    return x


def block_row_sums(M: np.ndarray, r: int) -> np.ndarray:
    """Sum rows within each consecutive block of r rows."""
    M = np.asarray(M)
    _check_divides(M.shape[0], r)
    nb = M.shape[0] // r
    return M.reshape(nb, r, *M.shape[1:]).sum(axis=1)


def collapse(B: np.ndarray, Y: np.ndarray, r: int) -> CollapsedSystem:
    """Collapse (B, Y) into the (n/r)-row block-sum system."""
    B = np.asarray(B, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape[0] != B.shape[0]:
        raise ValueError(f"B has {B.shape[0]} rows but Y has {Y.shape[0]}")
    _check_divides(B.shape[0], r)
    return CollapsedSystem(B_tilde=block_row_sums(B, r), Y_tilde=block_row_sums(Y, r))


def init_estimate(cs: CollapsedSystem, B: np.ndarray) -> np.ndarray:
    """Initial estimate of the unpermuted observations, B @ pinv(B_tilde) @ Y_tilde."""
    x = min_norm_solve(cs.B_tilde, cs.Y_tilde)
    return np.asarray(B) @ x
