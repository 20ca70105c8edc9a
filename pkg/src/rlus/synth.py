"""Synthetic problem instances.

The generative model is Y = P B X + N with B (n x d) and X (d x m) drawn
i.i.d. standard normal, P a uniform r-local permutation, and N i.i.d.
Gaussian with variance sigma^2 = ||B X||_F^2 / (n * 10^(snr_db / 10)).
Noiseless instances are encoded with snr_db = inf (sigma^2 = 0); the
generator branches on it explicitly, so no overflowing powers are formed.

Everything is deterministic given the 64-bit seed: the draw order is fixed
(B, then X, then the permutation, then the noise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import perm as permmod
from .perm import RLocalPermutation


@dataclass(frozen=True)
class InstanceConfig:
    n: int
    d: int
    m: int
    r: int
    snr_db: float = math.inf
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.n < self.d:
            raise ValueError(f"need n >= d >= 1, got n={self.n}, d={self.d}")
        if self.m < 1:
            raise ValueError(f"need m >= 1, got m={self.m}")
        permmod._check_divides(self.n, self.r)

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.snr_db)


@dataclass(frozen=True)
class ProblemView:
    """Exactly the fields a solver is allowed to see."""

    B: np.ndarray
    Y: np.ndarray
    r: int


@dataclass(frozen=True)
class SensingInstance:
    config: InstanceConfig
    B: np.ndarray
    X_star: np.ndarray
    pi_star: RLocalPermutation
    sigma2: float
    Y: np.ndarray
    Y_clean: np.ndarray  # B @ X_star, unpermuted; evaluation only

    def problem(self) -> ProblemView:
        return ProblemView(B=self.B, Y=self.Y, r=self.config.r)


def generate(cfg: InstanceConfig) -> SensingInstance:
    """Draw one instance of the measurement model from cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    B = rng.standard_normal((cfg.n, cfg.d))
    X_star = rng.standard_normal((cfg.d, cfg.m))
    pi_star = permmod.sample_rlocal(cfg.n, cfg.r, rng)
    Y_clean = B @ X_star
    if cfg.noiseless:
        sigma2 = 0.0
        Y = permmod.apply(pi_star, Y_clean)
    else:
        power = float(np.sum(Y_clean**2))
        sigma2 = power / (cfg.n * 10.0 ** (cfg.snr_db / 10.0))
        noise = math.sqrt(sigma2) * rng.standard_normal((cfg.n, cfg.m))
        Y = permmod.apply(pi_star, Y_clean) + noise
    return SensingInstance(
        config=cfg,
        B=B,
        X_star=X_star,
        pi_star=pi_star,
        sigma2=sigma2,
        Y=Y,
        Y_clean=Y_clean,
    )


def empirical_snr(inst: SensingInstance) -> float:
    """Realized SNR in dB, 10*log10(||B X||_F^2 / (n * sigma^2)).

    Returns inf for noiseless instances (sigma^2 = 0).
    """
    if inst.sigma2 == 0.0:
        return math.inf
    power = float(np.sum(inst.Y_clean**2))
    return 10.0 * math.log10(power / (inst.config.n * inst.sigma2))
