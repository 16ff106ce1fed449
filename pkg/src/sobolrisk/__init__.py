"""Sobol indices from orthonormal metamodels, with error and risk bounds."""

from sobolrisk.fitting import Metamodel, TrainingSample, design_matrix, fit, fit_ols, fit_projection, rmse_holdout
from sobolrisk.indices import (
    IndexReport,
    analytic_gfunction_indices,
    analytic_ishigami_indices,
    general_index,
    indices_from_coeffs,
    mc_oracle_indices,
)
from sobolrisk.measures import BasisSpec, ProductMeasure, eval_multivariate, eval_univariate, k_n, sample
from sobolrisk.quality import bootstrap_bound, bound_per_index, bound_symmetric, bound_sums, quality_control
from sobolrisk.risk import (
    RiskBoundInputs,
    empirical_risk,
    estimate_best_error,
    kappa_r,
    r_from_sample,
    risk_bound_general,
    risk_bound_ols,
    risk_bound_projection,
    stability_satisfied,
)
from sobolrisk.testfuncs import GFunction, Ishigami, SpanElement, with_noise
from sobolrisk.truncation import TruncationSet, build_hyperbolic, build_max_degree

__version__ = "0.1.0"
