import math

import numpy as np
import pytest

from rlus.perm import apply
from rlus.synth import InstanceConfig, empirical_snr, generate


def test_config_validation():
    with pytest.raises(ValueError):
        InstanceConfig(n=4, d=5, m=1, r=2)  # n < d
    with pytest.raises(ValueError):
        InstanceConfig(n=6, d=2, m=0, r=3)  # m < 1
    with pytest.raises(ValueError):
        InstanceConfig(n=6, d=2, m=1, r=4)  # r does not divide n


def test_noiseless_is_exact_permutation():
    inst = generate(InstanceConfig(n=12, d=3, m=2, r=4, snr_db=math.inf, seed=1))
    assert inst.sigma2 == 0.0
    assert np.array_equal(inst.Y, apply(inst.pi_star, inst.Y_clean))
    # multiset of rows is preserved
    assert np.allclose(np.sort(inst.Y, axis=0), np.sort(inst.Y_clean, axis=0))


def test_sigma2_formula_30db():
    inst = generate(InstanceConfig(n=10, d=5, m=4, r=2, snr_db=30.0, seed=2))
    power = float(np.sum(inst.Y_clean**2))
    assert inst.sigma2 == pytest.approx(power / (10 * 1000.0))


def test_determinism():
    cfg = InstanceConfig(n=20, d=4, m=3, r=5, snr_db=10.0, seed=42)
    a = generate(cfg)
    b = generate(cfg)
    assert np.array_equal(a.B, b.B)
    assert np.array_equal(a.X_star, b.X_star)
    assert np.array_equal(a.Y, b.Y)
    assert a.pi_star == b.pi_star


def test_empirical_snr_identity():
    inst = generate(InstanceConfig(n=16, d=4, m=2, r=4, snr_db=30.0, seed=3))
    assert empirical_snr(inst) == pytest.approx(30.0, abs=1e-9)
    inst0 = generate(InstanceConfig(n=16, d=4, m=2, r=4, snr_db=0.0, seed=3))
    assert empirical_snr(inst0) == pytest.approx(0.0, abs=1e-9)
    assert empirical_snr(generate(InstanceConfig(n=16, d=4, m=2, r=4, seed=3))) == math.inf


def test_gaussian_moments():
    # pooled over instances: n*d >= 1e4 entries of B should look standard normal
    vals = []
    for seed in range(10):
        inst = generate(InstanceConfig(n=40, d=30, m=1, r=4, snr_db=20.0, seed=seed))
        vals.append(inst.B.ravel())
    vals = np.concatenate(vals)
    assert vals.size >= 10_000
    assert abs(vals.mean()) < 0.05
    assert abs(vals.var() - 1.0) < 0.05


def test_noise_variance_realized():
    inst = generate(InstanceConfig(n=500, d=10, m=25, r=5, snr_db=5.0, seed=9))
    noise = inst.Y - apply(inst.pi_star, inst.Y_clean)
    assert noise.size >= 10_000
    assert abs(noise.var() - inst.sigma2) / inst.sigma2 < 0.10


def test_problem_view_hides_ground_truth():
    inst = generate(InstanceConfig(n=12, d=3, m=2, r=3, snr_db=20.0, seed=5))
    view = inst.problem()
    assert set(view.__dataclass_fields__) == {"B", "Y", "r"}
    assert np.array_equal(view.B, inst.B)
    assert np.array_equal(view.Y, inst.Y)
    assert view.r == 3
