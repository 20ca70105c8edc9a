"""Comparison methods: blockwise leverage-score sorting, identity, oracle.

The leverage-score baseline matches the diagonal of the projection onto the
column space of Y to that of B, block by block: scores are permutation
covariant, so sorting them within each block and pairing by rank estimates
each block permutation in one shot, with no alternation between signal and
permutation estimates.  A linear-assignment variant matches whole projection
rows (order-insensitively) instead of scalar scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import perm as permmod
from .collapse import min_norm_solve
from .perm import Permutation, RLocalPermutation, _check_divides
from .synth import SensingInstance


class BaselineKind(Enum):
    RLOCAL_LEVSORT = "levsort"
    IDENTITY = "identity"
    ORACLE_PERMUTATION = "oracle"


def _orthonormal_basis(M: np.ndarray) -> np.ndarray:
    """Left singular vectors above the shared numerical-rank cutoff."""
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0:
        return U[:, :0]
    cutoff = max(M.shape) * np.finfo(np.float64).eps * s[0]
    return U[:, s > cutoff]


def _leverage_scores(U: np.ndarray) -> np.ndarray:
    return np.sum(U * U, axis=1)


def rlocal_levsort(
    B: np.ndarray, Y: np.ndarray, r: int, assignment: bool = False
) -> RLocalPermutation:
    """Blockwise leverage-score matching of Y onto B.

    Default pairs by within-block score rank (ties by index, so the output
    is always a valid permutation).  With assignment=True, each block is
    matched by minimum-cost linear assignment between sorted projection
    rows, which is less brittle when scores nearly tie.
    """
    B = np.asarray(B, dtype=np.float64)
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    n = B.shape[0]
    if Y.shape[0] != n:
        raise ValueError(f"B has {n} rows but Y has {Y.shape[0]}")
    _check_divides(n, r)
    U_B = _orthonormal_basis(B)
    U_Y = _orthonormal_basis(Y)
    lev_B = _leverage_scores(U_B)
    lev_Y = _leverage_scores(U_Y)
    if assignment:
        P_B = np.sort(U_B @ U_B.T, axis=1)  # rows as sorted profiles:
        P_Y = np.sort(U_Y @ U_Y.T, axis=1)  # invariant to column shuffling
    blocks = []
    for k in range(n // r):
        rows = np.arange(k * r, (k + 1) * r)
        if assignment:
            cost = np.sum(
                (P_Y[rows][:, None, :] - P_B[rows][None, :, :]) ** 2, axis=2
            )
            ri, ci = linear_sum_assignment(cost)
            mapping = np.empty(r, dtype=np.int64)
            mapping[ri] = ci
        else:
            order_B = np.lexsort((np.arange(r), lev_B[rows]))
            order_Y = np.lexsort((np.arange(r), lev_Y[rows]))
            mapping = np.empty(r, dtype=np.int64)
            mapping[order_Y] = order_B
        blocks.append(Permutation(tuple(int(i) for i in mapping)))
    return RLocalPermutation(r, tuple(blocks))


def identity_estimate(B: np.ndarray, Y: np.ndarray, r: int) -> RLocalPermutation:
    """The no-de-permutation baseline."""
    return RLocalPermutation.identity(np.asarray(B).shape[0], r)


def oracle_solve(inst: SensingInstance) -> np.ndarray:
    """Least squares with the true permutation: the noise floor."""
    return min_norm_solve(inst.B, permmod.apply(inst.pi_star.inverse(), inst.Y))


@dataclass(frozen=True)
class BaselineSolution:
    pi_hat: RLocalPermutation
    X_hat: np.ndarray


def solve_with_permutation(B: np.ndarray, Y: np.ndarray, pi_hat: RLocalPermutation):
    """Least-squares signal estimate for a fixed permutation estimate."""
    return min_norm_solve(B, permmod.apply(pi_hat.inverse(), Y))
