import numpy as np
import pytest

from rlus.baselines import (
    BaselineKind,
    identity_estimate,
    oracle_solve,
    rlocal_levsort,
    solve_with_permutation,
)
from rlus.perm import apply, frac_hamming, sample_rlocal
from rlus.synth import InstanceConfig, generate


def test_kind_values():
    assert {k.value for k in BaselineKind} == {"levsort", "identity", "oracle"}


def test_levsort_identity_noiseless_m_equals_d():
    # leverage scores of Y coincide with those of B when nothing is permuted
    rng = np.random.default_rng(0)
    B = rng.standard_normal((24, 4))
    X = rng.standard_normal((4, 4))  # m = d
    Y = B @ X
    lev_err = 0
    pi = rlocal_levsort(B, Y, 4)
    assert frac_hamming(sample_rlocal(24, 4, rng).identity(24, 4), pi) == 0.0


def test_levsort_recovers_under_orthogonal_x():
    # X orthogonal: the projection onto col(Y) equals the permuted projection
    # onto col(B), so block score sorting recovers the permutation
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(400 + seed)
        B = rng.standard_normal((16, 4))
        A = rng.standard_normal((4, 4))
        Q, _ = np.linalg.qr(A)  # orthogonal X, m = d
        pi_star = sample_rlocal(16, 4, rng)
        Y = apply(pi_star, B @ Q)
        pi_hat = rlocal_levsort(B, Y, 4)
        hits += int(pi_hat == pi_star)
    assert hits == 20


def test_levsort_tie_still_valid_permutation():
    B = np.vstack([np.eye(2), np.eye(2)])  # duplicated rows: tied scores
    Y = B.copy()
    pi = rlocal_levsort(B, Y, 2)
    for blk in pi.blocks:
        assert sorted(blk.map) == [0, 1]


def test_levsort_assignment_variant():
    rng = np.random.default_rng(77)
    B = rng.standard_normal((16, 4))
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    pi_star = sample_rlocal(16, 4, rng)
    Y = apply(pi_star, B @ Q)
    pi_hat = rlocal_levsort(B, Y, 4, assignment=True)
    assert pi_hat == pi_star


def test_levsort_validates(rng):
    with pytest.raises(ValueError):
        rlocal_levsort(rng.standard_normal((6, 2)), rng.standard_normal((4, 2)), 2)


def test_levsort_rank_deficient_y_tolerated(rng):
    B = rng.standard_normal((12, 4))
    Y = np.zeros((12, 3))
    Y[:, 0] = B @ rng.standard_normal(4)  # rank 1
    pi = rlocal_levsort(B, Y, 3)
    assert np.array_equal(np.sort(pi.as_global_map()), np.arange(12))


def test_oracle_noiseless_exact():
    inst = generate(InstanceConfig(n=16, d=4, m=3, r=4, seed=3))
    X_hat = oracle_solve(inst)
    assert np.linalg.norm(X_hat - inst.X_star) < 1e-8


def test_oracle_identity_same_as_plain_ls():
    rng = np.random.default_rng(5)
    inst = generate(InstanceConfig(n=12, d=3, m=2, r=1, seed=5))  # r=1: identity
    from rlus.collapse import min_norm_solve

    assert np.allclose(oracle_solve(inst), min_norm_solve(inst.B, inst.Y))


def test_oracle_noise_floor_dominance():
    # every method's signal error is at least the oracle's, minus tolerance
    inst = generate(InstanceConfig(n=64, d=8, m=4, r=8, snr_db=30.0, seed=11))
    x_oracle = oracle_solve(inst)
    err_oracle = np.linalg.norm(x_oracle - inst.X_star)

    pi_lev = rlocal_levsort(inst.B, inst.Y, 8)
    err_lev = np.linalg.norm(solve_with_permutation(inst.B, inst.Y, pi_lev) - inst.X_star)
    pi_id = identity_estimate(inst.B, inst.Y, 8)
    err_id = np.linalg.norm(solve_with_permutation(inst.B, inst.Y, pi_id) - inst.X_star)
    assert err_lev >= err_oracle - 1e-9
    assert err_id >= err_oracle - 1e-9


def test_identity_estimate():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((6, 2))
    pi = identity_estimate(B, B, 3)
    assert np.array_equal(pi.as_global_map(), np.arange(6))
