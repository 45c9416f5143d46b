"""Outlier testing with conformal p-values.

Marginal and calibration-conditional p-values from any one-class score
function, multiplicity-safe testing procedures, uniform false-positive-rate
confidence bands, and a seeded Monte-Carlo harness that reproduces the
statistical guarantees end to end.
"""

from .adjust import (
    AdjustmentSequence,
    apply,
    asymptotic_sequence,
    coverage_probability_mc,
    dempster_sequence,
    dkwm_sequence,
    effective_level,
    monte_carlo_sequence,
    simes_sequence,
)
from .bands import FprBand, fpr_band, fpr_pointwise_law, prediction_set_threshold
from .conformal import (
    CalibrationSet,
    PValueVector,
    marginal_pvalue,
    marginal_pvalue_randomized,
    marginal_pvalues_batch,
)
from .mtest import (
    GlobalTestResult,
    RejectionReport,
    bh,
    fdp_power,
    fisher_corrected_test,
    fisher_test,
    harmonic_mean_pvalue,
    simes_global_pvalue,
    storey_bh,
    storey_pi0,
    stouffer_pvalue,
)
from .randomness import RandomStream, uniform_order_stats
from .scoring import fit_knn, fit_mahalanobis, oracle_mixture
from .sim import (
    ExperimentConfig,
    ExperimentReport,
    MixtureSpec,
    fisher_null_calibration,
    fpr_beta_check,
    lemma1_correlation_check,
    make_mixture,
    power_curves,
    run_batch_experiment,
    run_outlier_experiment,
    sample_mixture,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
