import itertools

import numpy as np
import pytest

from rlus.collapse import min_norm_solve
from rlus.perm import apply, sample_rlocal
from rlus.stage_a import (
    AugmentedSystem,
    StageAConfig,
    block_sort_indices,
    candidate_pairs,
    forward_error,
    one_dim_qap_objective,
    rank_match_maps,
    run_stage_a,
    selection_residual,
)
from rlus.synth import InstanceConfig, generate


def test_block_sort_plain():
    v = np.array([3.0, 1.0, 2.0])
    assert block_sort_indices(v, {0, 1, 2}, 3, 0) == [1, 2, 0]


def test_block_sort_singleton_and_empty():
    v = np.array([3.0, 1.0, 2.0, 5.0])
    assert block_sort_indices(v, {2}, 2, 1) == [2]
    assert block_sort_indices(v, set(), 2, 0) == []


def test_block_sort_tie_breaks_by_index():
    v = np.array([2.0, 2.0])
    assert block_sort_indices(v, {0, 1}, 2, 0) == [0, 1]


def test_block_sort_range_check():
    with pytest.raises(ValueError):
        block_sort_indices(np.zeros(4), {0}, 2, 2)


def test_candidate_pairs_rank():
    assert candidate_pairs([4, 2], [7, 5]) == [(4, 7), (2, 5)]
    assert candidate_pairs([4], [7]) == [(4, 7)]
    assert candidate_pairs([4], [7], "cross") == [(4, 7)]


def test_candidate_pairs_cross():
    assert candidate_pairs([1, 2], [3, 4], "cross") == [(1, 3), (1, 4), (2, 3), (2, 4)]


def test_candidate_pairs_lockstep_violation():
    with pytest.raises(RuntimeError):
        candidate_pairs([1, 2], [3])


def test_config_validation():
    with pytest.raises(ValueError):
        StageAConfig(candidate_mode="bogus")
    with pytest.raises(ValueError):
        StageAConfig(residual="bogus")


def true_pairs(inst):
    gmap = inst.pi_star.as_global_map()
    return {(int(gmap[q]), q) for q in range(inst.config.n)}


def test_forward_error_true_pair_keeps_consistency():
    inst = generate(InstanceConfig(n=12, d=4, m=1, r=3, seed=5))
    y = inst.Y[:, 0]
    aug = AugmentedSystem.from_collapse(inst.B, y, 3)
    p, q = sorted(true_pairs(inst))[0]
    _, x = forward_error(inst.B, y, aug, p, q)
    A = np.vstack([aug.B_aug, inst.B[p]])
    b = np.append(aug.y_aug, y[q])
    assert np.linalg.norm(A @ x - b) < 1e-8


def dense_ls_oracle(B, y, aug, p, q):
    """Independent scorer: explicit pseudoinverse of the augmented system."""
    A = np.vstack([aug.B_aug, B[p]])
    b = np.append(aug.y_aug, y[q])
    x = np.linalg.pinv(A, rcond=max(A.shape) * np.finfo(float).eps) @ b
    return np.linalg.norm(y - B @ x)


def test_forward_error_matches_dense_oracle():
    inst = generate(InstanceConfig(n=8, d=4, m=1, r=4, seed=7))
    y = inst.Y[:, 0]
    aug = AugmentedSystem.from_collapse(inst.B, y, 4)
    for k in range(2):
        for p in range(k * 4, (k + 1) * 4):
            for q in range(k * 4, (k + 1) * 4):
                err, _ = forward_error(inst.B, y, aug, p, q)
                assert err == pytest.approx(dense_ls_oracle(inst.B, y, aug, p, q), abs=1e-10)


def test_forward_error_validates_pair():
    inst = generate(InstanceConfig(n=8, d=4, m=1, r=4, seed=7))
    y = inst.Y[:, 0]
    aug = AugmentedSystem.from_collapse(inst.B, y, 4)
    with pytest.raises(ValueError):
        forward_error(inst.B, y, aug, 0, 5)  # cross-block pair
    aug.append(inst.B, y, 0, 1)
    with pytest.raises(ValueError):
        forward_error(inst.B, y, aug, 0, 2)  # p already matched


def test_forward_error_zero_at_full_rank_identity():
    # identity permutation, append true pairs up to rank d, last candidate exact
    rng = np.random.default_rng(3)
    B = rng.standard_normal((8, 3))
    x_star = rng.standard_normal(3)
    y = B @ x_star  # identity permutation, no noise
    aug = AugmentedSystem.from_collapse(B, y, 4)  # n/r = 2, need 1 more row
    err, x = forward_error(B, y, aug, 0, 0)
    assert err < 1e-6
    assert np.linalg.norm(x - x_star) < 1e-6


def test_run_stage_a_no_augmentation_when_determined():
    inst = generate(InstanceConfig(n=24, d=4, m=1, r=3, seed=2))  # n/r = 8 >= d
    res = run_stage_a(inst.B, inst.Y[:, 0], 3)
    assert res.matched == []
    x_err = np.linalg.norm(res.x_hat - inst.X_star[:, 0]) / np.linalg.norm(inst.X_star[:, 0])
    assert x_err < 1e-8


def test_run_stage_a_identity_fixed_point():
    # d=16, r=8, n=96: identity permutation, noiseless; augmentation stays
    # consistent and the final solve is exact
    rng = np.random.default_rng(11)
    B = rng.standard_normal((96, 16))
    x_star = rng.standard_normal(16)
    y = B @ x_star
    res = run_stage_a(B, y, 8)
    assert len(res.matched) == 4
    assert np.linalg.norm(res.x_hat - x_star) / np.linalg.norm(x_star) < 1e-6


def test_run_stage_a_loop_count_and_bookkeeping():
    inst = generate(InstanceConfig(n=96, d=16, m=1, r=8, snr_db=20.0, seed=4))
    res = run_stage_a(inst.B, inst.Y[:, 0], 8, StageAConfig(trace=True))
    assert len(res.matched) == 16 - 96 // 8  # exactly d - n/r augmentations
    ps = [p for p, _ in res.matched]
    qs = [q for _, q in res.matched]
    assert len(set(ps)) == len(ps) and len(set(qs)) == len(qs)
    for p, q in res.matched:
        assert p // 8 == q // 8  # pairs share a block
    assert len(res.trace) == len(res.matched)


def test_run_stage_a_final_system_square():
    inst = generate(InstanceConfig(n=32, d=12, m=1, r=4, seed=8))
    y = inst.Y[:, 0]
    aug = AugmentedSystem.from_collapse(inst.B, y, 4)
    res = run_stage_a(inst.B, y, 4)
    assert aug.B_aug.shape[0] + len(res.matched) == 12


def test_run_stage_a_rank_never_decreases():
    inst = generate(InstanceConfig(n=32, d=12, m=1, r=4, snr_db=10.0, seed=8))
    y = inst.Y[:, 0]
    # replay the matched pairs, tracking rank growth
    res = run_stage_a(inst.B, y, 4)
    aug = AugmentedSystem.from_collapse(inst.B, y, 4)
    prev_rank = np.linalg.matrix_rank(aug.B_aug)
    for p, q in res.matched:
        aug.append(inst.B, y, p, q)
        rank = np.linalg.matrix_rank(aug.B_aug)
        assert prev_rank <= rank <= prev_rank + 1
        prev_rank = rank


def test_run_stage_a_exhaustive_toy_oracle():
    # d=3, r=2, n=4: a single augmentation; the greedy choice must attain the
    # minimum selection residual over the whole candidate set it saw
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        B = rng.standard_normal((4, 3))
        x_star = rng.standard_normal(3)
        pi = sample_rlocal(4, 2, rng)
        y = apply(pi, B @ x_star)
        cfg = StageAConfig()
        res = run_stage_a(B, y, 2, cfg)
        assert len(res.matched) == 1
        chosen = selection_residual(y, res.y_hat, 2, cfg.residual)
        best = np.inf
        aug = AugmentedSystem.from_collapse(B, y, 2)
        x0 = min_norm_solve(aug.B_aug, aug.y_aug)
        y0 = B @ x0
        for k in range(2):
            ps = block_sort_indices(y0, aug.P, 2, k)
            qs = block_sort_indices(y, aug.Q, 2, k)
            for p, q in candidate_pairs(ps, qs, cfg.candidate_mode):
                A = np.vstack([aug.B_aug, B[p]])
                b = np.append(aug.y_aug, y[q])
                xc = min_norm_solve(A, b)
                best = min(best, selection_residual(y, B @ xc, 2, cfg.residual))
        assert chosen == pytest.approx(best, abs=1e-10)


def test_run_stage_a_r1_returns_plain_solve():
    inst = generate(InstanceConfig(n=8, d=4, m=1, r=1, seed=1))
    res = run_stage_a(inst.B, inst.Y[:, 0], 1)
    assert res.matched == []
    assert np.linalg.norm(res.x_hat - inst.X_star[:, 0]) < 1e-8


def test_run_stage_a_validates_inputs():
    inst = generate(InstanceConfig(n=8, d=4, m=1, r=4, seed=1))
    with pytest.raises(ValueError):
        run_stage_a(inst.B, inst.Y[:, 0], 3)  # r does not divide n
    with pytest.raises(ValueError):
        run_stage_a(inst.B, inst.Y[:2, 0], 4)  # view length mismatch
    with pytest.raises(ValueError):
        run_stage_a(inst.B, inst.Y[:, 0], 4, StageAConfig(max_augmentations=100))


def brute_force_1d_qap(a, b):
    """Enumerate all assignments of the scalar alignment objective."""
    best = np.inf
    for sig in itertools.permutations(range(len(a))):
        best = min(best, one_dim_qap_objective(a, b, sig))
    return best


def test_sorting_optimality_small_vectors(rng):
    # the scalar alignment is always minimized by the ascending-ascending or
    # ascending-descending rank matching
    for trial in range(60):
        length = int(rng.integers(2, 8))
        a = rng.standard_normal(length)
        b = rng.standard_normal(length)
        up, down = rank_match_maps(a, b)
        rank_best = min(
            one_dim_qap_objective(a, b, up), one_dim_qap_objective(a, b, down)
        )
        assert rank_best == pytest.approx(brute_force_1d_qap(a, b), abs=1e-10)
