"""r-local unlabeled sensing: solvers, baselines, and a benchmark harness.

Recover a signal X and a block-diagonal (r-local) permutation P from
scrambled linear measurements Y = P B X + N.  The solver first denoises
each view by greedily augmenting the permutation-invariant collapsed
system, then aligns per-block covariance structure through entropically
regularized soft couplings.
"""

from ._accel import backend
from .baselines import BaselineKind, oracle_solve, rlocal_levsort
from .bench import SweepSpec, TrialRecord, run_sweep, run_trial, summarize
from .collapse import CollapsedSystem, collapse, init_estimate, min_norm_solve
from .gwalign import (
    Coupling,
    GwConfig,
    GwNumericalError,
    brute_force_gw,
    entropic_gw,
    gw_cost,
    stage_b,
    threshold_to_permutation,
)
from .perm import (
    Permutation,
    RLocalPermutation,
    apply,
    frac_hamming,
    hamming_distortion,
    inverse,
    sample_rlocal,
)
from .pipeline import Solution, depermute
from .stage_a import StageAConfig, StageAResult, run_stage_a
from .synth import InstanceConfig, ProblemView, SensingInstance, empirical_snr, generate

__version__ = "0.1.0"

__all__ = [
    "BaselineKind",
    "CollapsedSystem",
    "Coupling",
    "GwConfig",
    "GwNumericalError",
    "InstanceConfig",
    "Permutation",
    "ProblemView",
    "RLocalPermutation",
    "SensingInstance",
    "Solution",
    "StageAConfig",
    "StageAResult",
    "SweepSpec",
    "TrialRecord",
    "apply",
    "backend",
    "brute_force_gw",
    "collapse",
    "depermute",
    "empirical_snr",
    "entropic_gw",
    "frac_hamming",
    "generate",
    "gw_cost",
    "hamming_distortion",
    "init_estimate",
    "inverse",
    "min_norm_solve",
    "oracle_solve",
    "rlocal_levsort",
    "run_stage_a",
    "run_sweep",
    "run_trial",
    "sample_rlocal",
    "stage_b",
    "summarize",
    "threshold_to_permutation",
]
