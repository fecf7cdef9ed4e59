"""Multivariate linear regression with sparsely mismatched (response, predictor) pairs.

Stage one estimates the coefficients while absorbing mismatches as row-sparse
contamination; stage two re-pairs responses with fitted predictors.
"""

from .estimators import (
    CrrOptions,
    GroupLassoOptions,
    RankDeficientError,
    estimate_mismatch_set,
    estimate_sigma0,
    fit_crr,
    fit_group_lasso,
    fit_naive,
    fit_oracle,
    group_threshold,
    lambda0,
    lambda_star,
    refit,
)
from .matcher import (
    InfeasibleMatchError,
    MatchOptions,
    default_tau,
    match_constrained,
    match_permutation,
    match_threshold,
    two_stage,
)
from .model import (
    FitResult,
    GeneralizedMatch,
    GroundTruth,
    MatchResult,
    RegressionData,
    contamination_view,
    match_to_matrix,
)
from .relaxations import FwOptions, fit_ds_cons, fit_ds_reg, lp_oracle_cons
from .synth import SynthConfig, generate, make_coefficients, make_mismatch, make_rng

__version__ = "0.1.0"
