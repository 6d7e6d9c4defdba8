"""Global minimum variance portfolio: weights, posterior summaries, error metrics."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import NotPositiveDefinite, solve_spd, spectral_norm
from .ppp import PosteriorEnsemble

__all__ = [
    "IntervalSummary",
    "gmvp_weights",
    "gmvp_ensemble",
    "credible_intervals",
    "coverage",
    "relative_cov_error",
    "relative_gmvp_error",
    "realized_portfolio_sd",
    "write_intervals",
    "write_weights",
]


@dataclass(frozen=True, eq=False)
class IntervalSummary:
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float

    def __post_init__(self):
        if not 0 < self.level < 1:
            raise ValueError("level must be in (0, 1)")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")


def gmvp_weights(sigma) -> np.ndarray:
    """``Sigma^-1 1 / (1^T Sigma^-1 1)``, via a Cholesky solve."""
    S = np.asarray(sigma, dtype=float)
    try:
        x = solve_spd(S, np.ones(S.shape[0]))
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(
            exc.pivot, f"{exc}; post-process the covariance before computing GMVP weights"
        ) from None
    return x / x.sum()


def gmvp_ensemble(e: "PosteriorEnsemble | np.ndarray") -> np.ndarray:
    """GMVP weights of every draw, returned as an ``(N, p)`` array."""
    draws = e.draws if isinstance(e, PosteriorEnsemble) else np.asarray(e)
    out = np.empty(draws.shape[:2])
    for k, d in enumerate(draws):
        try:
            out[k] = gmvp_weights(d)
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(exc.pivot, f"draw {k} is not positive definite") from None
    return out


def credible_intervals(ws, level: float = 0.95) -> IntervalSummary:
    """Per-asset equal-tailed intervals (linear-interpolation quantiles)."""
    W = np.asarray(ws, dtype=float)
    if W.ndim != 2 or W.shape[0] == 0:
        raise ValueError("need a non-empty (N, p) collection of weight vectors")
    if W.shape[0] < 2:
        raise ValueError("need at least 2 weight vectors")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    lo, hi = np.quantile(W, [(1 - level) / 2, (1 + level) / 2], axis=0, method="linear")
    return IntervalSummary(W.mean(axis=0), lo, hi, level)


def coverage(summary: IntervalSummary, truth) -> float:
    """Percentage of assets whose true weight lies in its (closed) interval."""
    w = np.asarray(truth, dtype=float)
    if w.shape != summary.lower.shape:
        raise ValueError(f"truth has shape {w.shape}, intervals have {summary.lower.shape}")
    inside = (summary.lower <= w) & (w <= summary.upper)
    return 100.0 * inside.mean()


def relative_cov_error(truth, est) -> float:
    t = np.asarray(truth, dtype=float)
    e = np.asarray(est, dtype=float)
    if t.shape != e.shape:
        raise ValueError("dimension mismatch")
    denom = spectral_norm(t)
    if denom == 0:
        raise ValueError("truth is the zero matrix")
    return spectral_norm(t - e) / denom


def relative_gmvp_error(truth, est) -> float:
    t = np.asarray(truth, dtype=float)
    e = np.asarray(est, dtype=float)
    if t.shape != e.shape:
        raise ValueError("dimension mismatch")
    denom = np.linalg.norm(t)
    if denom == 0:
        raise ValueError("truth is the zero vector")
    return float(np.linalg.norm(t - e) / denom)


def realized_portfolio_sd(w, test) -> float:
    """``100 * sd(w^T x_t)`` over test rows, sample variance with divisor ``n - 1``."""
    X = np.asarray(test, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least 2 test rows")
    r = X @ np.asarray(w, dtype=float)
    return 100.0 * float(np.sqrt(np.var(r, ddof=1)))


def _labels(p, assets):
    return list(assets) if assets is not None else [str(i) for i in range(p)]


def write_intervals(summary: IntervalSummary, path, assets=None, truth=None) -> Path:
    path = Path(path)
    labels = _labels(len(summary.mean), assets)
    header = "asset,mean,lower,upper" + (",truth" if truth is not None else "")
    lines = [header]
    for k, a in enumerate(labels):
        vals = [summary.mean[k], summary.lower[k], summary.upper[k]]
        if truth is not None:
            vals.append(truth[k])
        lines.append(",".join([a] + [f"{v:.17g}" for v in vals]))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_weights(w, path, assets=None) -> Path:
    path = Path(path)
    lines = ["asset,weight"] + [f"{a},{v:.17g}" for a, v in zip(_labels(len(w), assets), w)]
    path.write_text("\n".join(lines) + "\n")
    return path
