"""Thresholding post-processed posterior for sparse covariance and GMVP inference."""

__version__ = "0.1.0"

from .gmvp import coverage, credible_intervals, gmvp_ensemble, gmvp_weights
from .linalg import NotPositiveDefinite, as_cov
from .ppp import (
    PosteriorEnsemble,
    ThresholdConfig,
    ensemble_mean,
    generate_ppp_ensemble,
    hard_threshold,
    pd_adjust,
    post_process,
)
from .sampling import IWParams, RngStream, default_prior, posterior_params, sample_inverse_wishart
from .tuning import CvPlan, cv_select
