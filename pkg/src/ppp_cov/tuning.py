"""Cross-validated choice of the threshold multiplier (and optionally the PD floor)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ._parallel import pmap
from .estimators import pd_fallback, sample_covariance
from .gmvp import gmvp_weights
from .linalg import NotPositiveDefinite
from .ppp import DEFAULT_EPSILON, PosteriorEnsemble, ThresholdConfig, hard_threshold, post_process
from .sampling import (
    IWParams,
    RngStream,
    _inv_scale_chol,
    default_prior,
    draw_block,
    posterior_params,
    second_moment,
    standard_df,
)

log = logging.getLogger(__name__)

OBJECTIVES = ("cov-spectral", "gmvp-variance")
CV_METHODS = ("ppp", "thres")


@dataclass(frozen=True)
class CvPlan:
    n_splits: int = 5
    train_fraction: float = 2 / 3
    grid_gamma: Optional[tuple[float, ...]] = None  # None: default grid from the data
    grid_epsilon: tuple[float, ...] = (DEFAULT_EPSILON,)
    objective: str = "cov-spectral"
    seed: int = 0
    n_grid: int = 21
    demean: bool = False
    # keep variances out of the thresholding; see README "Diagonal entries"
    preserve_diagonal: bool = True

    def __post_init__(self):
        if self.n_splits < 1:
            raise ValueError("n_splits must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.grid_gamma is not None:
            g = tuple(float(x) for x in self.grid_gamma)
            if not g or min(g) < 0 or any(b < a for a, b in zip(g, g[1:])):
                raise ValueError("grid_gamma must be a nonempty ascending list of nonnegative values")
            object.__setattr__(self, "grid_gamma", g)
        eps = tuple(float(x) for x in self.grid_epsilon)
        if not eps or min(eps) < 0:
            raise ValueError("grid_epsilon must be a nonempty list of nonnegative values")
        object.__setattr__(self, "grid_epsilon", eps)


@dataclass(frozen=True)
class CvResult:
    best: ThresholdConfig
    score_table: list[tuple[float, float, float, float]]  # (gamma, epsilon, mean, se)
    splits_used: int
    method: str = "ppp"
    objective: str = "cov-spectral"

    def write_csv(self, path) -> Path:
        path = Path(path)
        lines = ["gamma,epsilon,mean_loss,se_loss"]
        lines += [",".join(f"{v:.17g}" for v in row) for row in self.score_table]
        path.write_text("\n".join(lines) + "\n")
        return path


def cv_loss_cov(estimate, val, demean: bool = False) -> float:
    """Spectral distance from ``estimate`` to the validation second-moment matrix."""
    return float(_cov_losses(np.asarray(estimate, dtype=float)[None], val, demean)[0])


def cv_loss_gmvp(estimate, val) -> float:
    """Sample variance of validation portfolio returns under the estimate's GMVP."""
    V = np.asarray(val, dtype=float)
    if V.shape[0] < 2:
        raise ValueError("need at least 2 validation rows")
    w = gmvp_weights(estimate)
    return float(np.var(V @ w, ddof=1))


def _cov_losses(stack: np.ndarray, val, demean: bool = False) -> np.ndarray:
    V = np.asarray(val, dtype=float)
    if V.shape[-1] != stack.shape[-1]:
        raise ValueError(f"validation data has {V.shape[-1]} columns, estimate has dim {stack.shape[-1]}")
    eig = np.linalg.eigvalsh(stack - second_moment(V, demean))
    return np.maximum(-eig[:, 0], eig[:, -1])


def _gmvp_losses(stack: np.ndarray, val) -> np.ndarray:
    V = np.asarray(val, dtype=float)
    if V.shape[0] < 2:
        raise ValueError("need at least 2 validation rows")
    if V.shape[-1] != stack.shape[-1]:
        raise ValueError("dimension mismatch")
    try:
        L = np.linalg.cholesky(stack)
    except np.linalg.LinAlgError:
        out = np.empty(len(stack))
        for k, d in enumerate(stack):
            try:
                out[k] = cv_loss_gmvp(d, V)
            except NotPositiveDefinite:
                log.info("draw %d not PD under gmvp objective; scored as +inf", k)
                out[k] = np.inf
        return out
    ones = np.ones(stack.shape[:2] + (1,))
    y = np.linalg.solve(L, ones)
    x = np.linalg.solve(np.swapaxes(L, 1, 2), y)[..., 0]
    w = x / x.sum(axis=1, keepdims=True)
    return np.var(V @ w.T, axis=0, ddof=1)


def draw_losses(draws, val, objective: str, demean: bool = False) -> np.ndarray:
    stack = np.asarray(draws, dtype=float)
    if objective == "cov-spectral":
        return _cov_losses(stack, val, demean)
    if objective == "gmvp-variance":
        return _gmvp_losses(stack, val)
    raise ValueError(f"unknown objective {objective!r}")


def cv_posterior_loss(e: "PosteriorEnsemble | np.ndarray", val, objective: str, demean: bool = False) -> float:
    """Posterior mean of the per-draw validation loss."""
    draws = e.draws if isinstance(e, PosteriorEnsemble) else np.asarray(e)
    if len(draws) == 0:
        raise ValueError("empty ensemble")
    return float(np.mean(draw_losses(draws, val, objective, demean)))


def default_gamma_grid(data, n_grid: int = 21, demean: bool = False) -> tuple[float, ...]:
    """``n_grid`` points from 0 to the smallest multiplier zeroing every off-diagonal."""
    S = sample_covariance(data, demean)
    n, p = np.shape(data)
    if p < 2:
        return (0.0,)
    off = np.abs(S[~np.eye(p, dtype=bool)]).max()
    gmax = np.nextafter(off / math.sqrt(math.log(p) / n), np.inf)
    return tuple(np.linspace(0.0, gmax, n_grid).tolist())


def split_rows(n: int, train_fraction: float, stream: RngStream) -> tuple[np.ndarray, np.ndarray]:
    n_train = int(math.floor(train_fraction * n))
    perm = stream.generator().permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def _split_scores(job) -> np.ndarray:
    """Scores of shape ``(n_objectives, n_gamma, n_epsilon)`` for one split."""
    X, split, plan, method, gammas, prior_builder, n_cv, objectives = job
    train_idx, val_idx = split_rows(len(X), plan.train_fraction, RngStream(plan.seed, (split, 0)))
    train, val = X[train_idx], X[val_idx]
    n_tr, p = train.shape
    scores = np.empty((len(objectives), len(gammas), len(plan.grid_epsilon)))
    if method == "ppp":
        post = posterior_params(prior_builder(train), train, demean=plan.demean)
        raw = draw_block(_inv_scale_chol(post.scale), standard_df(post.nu, p),
                         RngStream(plan.seed, (split, 1)), range(n_cv))
        for a, g in enumerate(gammas):
            for b, eps in enumerate(plan.grid_epsilon):
                draws = post_process(raw, ThresholdConfig(g, n_tr, p, eps, plan.preserve_diagonal))
                for o, objective in enumerate(objectives):
                    scores[o, a, b] = np.mean(draw_losses(draws, val, objective, plan.demean))
        return scores
    S = sample_covariance(train, plan.demean)
    for a, g in enumerate(gammas):
        T = hard_threshold(S, ThresholdConfig(g, n_tr, p, preserve_diagonal=plan.preserve_diagonal))
        for b, eps in enumerate(plan.grid_epsilon):
            for o, objective in enumerate(objectives):
                if objective == "cov-spectral":
                    scores[o, a, b] = cv_loss_cov(T, val, plan.demean)
                    continue
                try:
                    scores[o, a, b] = cv_loss_gmvp(pd_fallback(T, eps), val)
                except NotPositiveDefinite:
                    log.info("thresholded estimate not PD after fallback (gamma=%g); scored +inf", g)
                    scores[o, a, b] = np.inf
    return scores


def cv_select(
    data,
    prior_builder: Optional[Callable[[np.ndarray], IWParams]] = None,
    plan: CvPlan = CvPlan(),
    n_cv: int = 200,
    method: str = "ppp",
    workers: int = 1,
) -> CvResult:
    """Pick the grid point with the smallest mean validation loss over random splits.

    ``method="ppp"`` scores the posterior mean of per-draw losses from ``n_cv``
    post-processed draws; ``method="thres"`` scores the thresholded sample
    covariance. Ties go to the earliest grid point, i.e. the smallest gamma.
    """
    return cv_select_many(data, prior_builder, plan, n_cv, method, workers, (plan.objective,))[plan.objective]


def cv_select_many(
    data,
    prior_builder=None,
    plan: CvPlan = CvPlan(),
    n_cv: int = 200,
    method: str = "ppp",
    workers: int = 1,
    objectives: Sequence[str] = OBJECTIVES,
) -> dict[str, CvResult]:
    """:func:`cv_select` for several objectives sharing the same splits and draws."""
    if method not in CV_METHODS:
        raise ValueError(f"method must be one of {CV_METHODS}, got {method!r}")
    bad = [o for o in objectives if o not in OBJECTIVES]
    if bad or not objectives:
        raise ValueError(f"objectives must be drawn from {OBJECTIVES}, got {objectives!r}")
    X = np.asarray(data, dtype=float)
    n, p = X.shape
    n_train = int(math.floor(plan.train_fraction * n))
    if n_train < 2 or n - n_train < 2:
        raise ValueError(f"too few rows ({n}) for a train/validation split")
    if prior_builder is None:
        prior_builder = partial(default_prior, demean=plan.demean)
    gammas = plan.grid_gamma or default_gamma_grid(X, plan.n_grid, plan.demean)
    objectives = tuple(objectives)
    jobs = [(X, s, plan, method, gammas, prior_builder, n_cv, objectives) for s in range(plan.n_splits)]
    per_split = np.stack(pmap(_split_scores, jobs, workers))
    with np.errstate(invalid="ignore"):
        mean = per_split.mean(axis=0)
        se = (per_split.std(axis=0, ddof=1) / math.sqrt(plan.n_splits)
              if plan.n_splits > 1 else np.zeros_like(mean))
    out = {}
    for o, objective in enumerate(objectives):
        table, best, best_score = [], None, np.inf
        for a, g in enumerate(gammas):
            for b, eps in enumerate(plan.grid_epsilon):
                table.append((g, eps, float(mean[o, a, b]), float(se[o, a, b])))
                if mean[o, a, b] < best_score:
                    best, best_score = (g, eps), mean[o, a, b]
        if best is None:
            raise ValueError(f"every grid point scored +inf under {objective}")
        cfg = ThresholdConfig(best[0], n, p, best[1], plan.preserve_diagonal)
        out[objective] = CvResult(cfg, table, plan.n_splits, method, objective)
    return out
