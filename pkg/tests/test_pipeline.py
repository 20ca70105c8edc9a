import numpy as np
import pytest

from rlus.collapse import min_norm_solve
from rlus.gwalign import brute_force_gw
from rlus.perm import RLocalPermutation, apply, frac_hamming, sample_rlocal
from rlus.pipeline import depermute, robust_refit
from rlus.synth import InstanceConfig, generate


def test_identity_determined_noiseless():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((24, 4))  # n/r = 8 >= d = 4
    X = rng.standard_normal((4, 3))
    Y = B @ X  # identity permutation
    sol = depermute(B, Y, 3)
    assert sol.pi_hat == RLocalPermutation.identity(24, 3)
    assert np.linalg.norm(sol.X_hat - X) / np.linalg.norm(X) < 1e-8


def test_planted_toy_oracle_dominance():
    # pipeline distortion can never beat the exhaustive per-block aligner run
    # on the same stage-A output
    for seed in range(20):
        inst = generate(InstanceConfig(n=8, d=3, m=4, r=4, seed=seed))
        sol = depermute(inst.B, inst.Y, 4)
        pipeline_dh = frac_hamming(inst.pi_star, sol.pi_hat)
        oracle_blocks = []
        for k in range(2):
            rows = slice(4 * k, 4 * (k + 1))
            C_src = sol.Y_hat[rows] @ sol.Y_hat[rows].T
            C_tgt = inst.Y[rows] @ inst.Y[rows].T
            bf_pi, _ = brute_force_gw(C_src, C_tgt)
            oracle_blocks.append(bf_pi.inverse())
        oracle_dh = frac_hamming(inst.pi_star, RLocalPermutation(4, tuple(oracle_blocks)))
        assert pipeline_dh >= oracle_dh - 1e-12


def test_relabeling_equivariance():
    # a consistent r-local relabeling of the observations leaves X_hat alone
    inst = generate(InstanceConfig(n=12, d=3, m=4, r=3, seed=21))
    rng = np.random.default_rng(99)
    rho = sample_rlocal(12, 3, rng)
    sol_a = depermute(inst.B, inst.Y, 3)
    sol_b = depermute(inst.B, apply(rho, inst.Y), 3)
    assert np.linalg.norm(sol_a.X_hat - sol_b.X_hat) < 1e-10


def test_solution_ls_identity():
    # X_hat is exactly the least-squares minimizer for the chosen permutation
    inst = generate(InstanceConfig(n=16, d=4, m=3, r=4, snr_db=15.0, seed=5))
    sol = depermute(inst.B, inst.Y, 4)
    unscrambled = apply(sol.pi_hat.inverse(), inst.Y)
    assert np.allclose(sol.X_hat, min_norm_solve(inst.B, unscrambled), atol=1e-12)
    base = np.linalg.norm(apply(sol.pi_hat, inst.B @ sol.X_hat) - inst.Y)
    rng = np.random.default_rng(1)
    for _ in range(5):
        X_pert = sol.X_hat + 1e-3 * rng.standard_normal(sol.X_hat.shape)
        pert = np.linalg.norm(apply(sol.pi_hat, inst.B @ X_pert) - inst.Y)
        assert base <= pert + 1e-12


def test_output_always_valid_rlocal():
    for seed in range(5):
        inst = generate(InstanceConfig(n=12, d=4, m=2, r=4, snr_db=-5.0, seed=seed))
        sol = depermute(inst.B, inst.Y, 4)
        g = np.sort(sol.pi_hat.as_global_map())
        assert np.array_equal(g, np.arange(12))
        for k, blk in enumerate(sol.pi_hat.blocks):
            assert sorted(blk.map) == list(range(4))


def test_input_validation():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((8, 4))
    with pytest.raises(ValueError):
        depermute(B, rng.standard_normal((6, 2)), 2)  # row mismatch
    with pytest.raises(ValueError):
        depermute(B, rng.standard_normal((8, 2)), 3)  # r does not divide n
    with pytest.raises(ValueError):
        depermute(rng.standard_normal((4, 6)), rng.standard_normal((4, 2)), 2)  # n < d


def test_refine_rounds_zero_still_works():
    inst = generate(InstanceConfig(n=24, d=6, m=6, r=4, seed=3))
    sol = depermute(inst.B, inst.Y, 4, refine_rounds=0)
    assert sol.diagnostics["refine_rounds_run"] == 0
    assert frac_hamming(inst.pi_star, sol.pi_hat) == 0.0


def test_single_view_vector_input():
    inst = generate(InstanceConfig(n=24, d=4, m=1, r=3, seed=7))
    sol = depermute(inst.B, inst.Y[:, 0], 3)
    assert sol.X_hat.shape == (4, 1)


def test_diagnostics_structure():
    inst = generate(InstanceConfig(n=12, d=4, m=2, r=3, snr_db=20.0, seed=2))
    sol = depermute(inst.B, inst.Y, 3)
    d = sol.diagnostics
    assert len(d["stage_a"]) == 2
    assert {t["block"] for t in d["stage_b"]} == {0, 1, 2, 3}
    assert d["timings"]["total_s"] > 0


def test_robust_refit_resists_outliers():
    rng = np.random.default_rng(4)
    B = rng.standard_normal((120, 6))
    X = rng.standard_normal((6, 3))
    Y = B @ X + 0.01 * rng.standard_normal((120, 3))
    Y_bad = Y.copy()
    bad_rows = rng.choice(120, size=30, replace=False)  # 25% gross outliers
    Y_bad[bad_rows] = rng.standard_normal((30, 3)) * 10
    plain = min_norm_solve(B, Y_bad)
    robust = robust_refit(B, Y_bad)
    err_plain = np.linalg.norm(plain - X) / np.linalg.norm(X)
    err_robust = np.linalg.norm(robust - X) / np.linalg.norm(X)
    assert err_robust < 0.05
    assert err_robust < err_plain / 5


def test_robust_refit_noiseless_exact():
    rng = np.random.default_rng(6)
    B = rng.standard_normal((40, 5))
    X = rng.standard_normal((5, 2))
    assert np.linalg.norm(robust_refit(B, B @ X) - X) < 1e-10
