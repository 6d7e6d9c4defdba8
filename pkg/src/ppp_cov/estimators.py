"""Frequentist comparators: sample covariance and its hard-thresholded version."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import NotPositiveDefinite, cholesky
from .ppp import DEFAULT_EPSILON, ThresholdConfig, hard_threshold, pd_adjust
from .sampling import second_moment

log = logging.getLogger(__name__)

METHOD_TAGS = ("PPP-mean", "IW-mean", "Thres", "SampleCov")


@dataclass(frozen=True, eq=False)
class PointEstimate:
    matrix: np.ndarray
    method_tag: str
    config: Optional[ThresholdConfig] = None

    def __post_init__(self):
        if self.method_tag not in METHOD_TAGS:
            raise ValueError(f"unknown method tag {self.method_tag!r}")
        if self.method_tag == "Thres" and self.config is None:
            raise ValueError("Thres estimate requires a threshold config")
        if not np.array_equal(self.matrix, self.matrix.T):
            raise ValueError("estimate must be symmetric")


def sample_covariance(data, demean: bool = False) -> np.ndarray:
    """``n^-1 sum x_i x_i^T`` (or the centered version, still divided by ``n``)."""
    X = np.asarray(data, dtype=float)
    if X.size == 0:
        raise ValueError("empty data")
    return second_moment(X, demean)


def thresholded_sample_cov(data, cfg: ThresholdConfig, demean: bool = False) -> PointEstimate:
    """Hard-thresholded sample covariance, without any PD repair."""
    return PointEstimate(hard_threshold(sample_covariance(data, demean), cfg), "Thres", cfg)


def pd_fallback(m: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Return ``m`` if it is PD, else ``pd_adjust(m)`` at floor ``epsilon``.

    Used before inverting a thresholded sample covariance for a portfolio.
    """
    try:
        cholesky(m)
        return m
    except NotPositiveDefinite:
        log.info("thresholded matrix not PD; applying pd_adjust with epsilon=%g", epsilon)
        p = m.shape[0]
        return pd_adjust(m, ThresholdConfig(gamma=0.0, n=1, p=p, epsilon=epsilon))
