"""Return-data ingestion and the rolling train/test GMVP backtest."""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from ._parallel import pmap
from .estimators import pd_fallback, sample_covariance, thresholded_sample_cov
from .gmvp import gmvp_ensemble, gmvp_weights, realized_portfolio_sd
from .linalg import NotPositiveDefinite
from .ppp import ThresholdConfig, generate_ppp_ensemble
from .sampling import RngStream, default_prior, sample_mvn
from .tuning import CvPlan, cv_select

log = logging.getLogger(__name__)

FORMATS = ("returns-csv", "prices-csv")
BACKTEST_METHODS = ("PPP", "Thres", "IW", "SampleCov")


@dataclass(frozen=True, eq=False)
class ReturnsMatrix:
    values: np.ndarray
    asset_ids: tuple[str, ...]
    period_ids: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"returns must be a non-empty 2-d matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("returns contain missing or non-finite values")
        if len(self.asset_ids) != v.shape[1] or len(self.period_ids) != v.shape[0]:
            raise ValueError("label counts do not match the matrix shape")
        if len(set(self.asset_ids)) != len(self.asset_ids) or len(set(self.period_ids)) != len(self.period_ids):
            raise ValueError("asset and period labels must be unique")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "asset_ids", tuple(map(str, self.asset_ids)))
        object.__setattr__(self, "period_ids", tuple(map(str, self.period_ids)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def load_returns(path, fmt: str = "returns-csv", log_returns: bool = False) -> ReturnsMatrix:
    """Read a CSV whose header row holds asset ids and first column period ids.

    Empty cells are missing; any asset with a missing cell is dropped. Prices
    are converted to simple returns ``p_t / p_{t-1} - 1`` (or log returns),
    which removes the first row.
    """
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    raw = pd.read_csv(path, index_col=0, dtype=str, keep_default_na=False)
    raw.columns = [c.strip() for c in raw.columns]
    values = np.full(raw.shape, np.nan)
    for j, col in enumerate(raw.columns):
        for i, cell in enumerate(raw[col]):
            cell = cell.strip()
            if cell == "" or cell.upper() in ("NA", "NAN"):
                continue
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: cannot parse {cell!r} at row {i + 2}, column {j + 2} ({col})"
                ) from None
    keep = ~np.isnan(values).any(axis=0)
    dropped = [c for c, k in zip(raw.columns, keep) if not k]
    if dropped:
        log.info("dropping %d asset(s) with missing values: %s", len(dropped), ", ".join(dropped))
    values = values[:, keep]
    assets = [c for c, k in zip(raw.columns, keep) if k]
    periods = [str(x) for x in raw.index]
    if not assets:
        raise ValueError(f"{path}: no assets left after dropping columns with missing values")
    if fmt == "prices-csv":
        if values.shape[0] < 2:
            raise ValueError("need at least two price rows")
        if np.any(values <= 0):
            raise ValueError("prices must be positive")
        values = np.diff(np.log(values), axis=0) if log_returns else values[1:] / values[:-1] - 1.0
        periods = periods[1:]
    return ReturnsMatrix(values, tuple(assets), tuple(periods))


def write_returns(r: ReturnsMatrix, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", *r.asset_ids])
        for pid, row in zip(r.period_ids, r.values):
            w.writerow([pid, *(f"{v:.17g}" for v in row)])
    return path


@dataclass(frozen=True)
class BacktestPlan:
    window_train: int = 48
    window_test: int = 12
    iterations: int = 20
    seed: int = 0
    N_draws: int = 2000
    n_cv: int = 200
    demean: bool = True
    level: float = 0.95

    def __post_init__(self):
        if self.window_train < 2 or self.window_test < 2:
            raise ValueError("windows must have at least 2 rows")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    def index_range(self, n: int) -> range:
        """Admissible last-train-row indices (1-based), ``window_train .. n - window_test``."""
        if self.window_train + self.window_test > n:
            raise ValueError(
                f"n = {n} rows is too small for {self.window_train} train + {self.window_test} test rows"
            )
        return range(self.window_train, n - self.window_test + 1)


def split_at(i: int, plan: BacktestPlan) -> tuple[np.ndarray, np.ndarray]:
    """0-based row indices of the train rows ``i - w + 1 .. i`` and test rows
    ``i + 1 .. i + w_test`` (both 1-based, inclusive)."""
    train = np.arange(i - plan.window_train, i)
    test = np.arange(i, i + plan.window_test)
    return train, test


def sample_index(n: int, plan: BacktestPlan, iteration: int) -> int:
    # drawn with replacement across iterations, one substream per iteration
    rng = plan.index_range(n)
    k = RngStream(plan.seed, (iteration, 0)).generator().integers(len(rng))
    return rng[int(k)]


def rolling_split(n: int, plan: BacktestPlan, iteration: int) -> tuple[np.ndarray, np.ndarray]:
    return split_at(sample_index(n, plan, iteration), plan)


@dataclass
class BacktestReport:
    sd: dict  # method -> list of per-window realized SD (NaN where the method failed)
    failures: dict = field(default_factory=dict)  # method -> list of (iteration, reason)
    indices: list = field(default_factory=list)

    def table(self) -> list[tuple[str, float, int]]:
        out = []
        for method, vals in self.sd.items():
            v = np.array(vals, dtype=float)
            ok = v[~np.isnan(v)]
            out.append((method, float(ok.mean()) if ok.size else math.nan, int(ok.size)))
        return out

    def write_csv(self, path) -> Path:
        path = Path(path)
        lines = ["method,mean_realized_sd,n_windows_used"]
        for method, mean, used in self.table():
            lines.append(f"{method},{'' if math.isnan(mean) else f'{mean:.17g}'},{used}")
        path.write_text("\n".join(lines) + "\n")
        return path


def _window_weights(method, train, plan: BacktestPlan, cv: CvPlan, stream: RngStream) -> np.ndarray:
    n, p = train.shape
    if method == "SampleCov":
        return gmvp_weights(sample_covariance(train, plan.demean))
    if method == "Thres":
        res = cv_select(train, None, cv, method="thres")
        T = thresholded_sample_cov(train, res.best, plan.demean).matrix
        return gmvp_weights(pd_fallback(T, res.best.epsilon))
    prior = default_prior(train, plan.demean)
    if method == "IW":
        ens = generate_ppp_ensemble(prior, train, ThresholdConfig(0.0, n, p, 0.0), plan.N_draws,
                                    stream, demean=plan.demean, raw=True)
    else:
        res = cv_select(train, None, cv, plan.n_cv)
        ens = generate_ppp_ensemble(prior, train, res.best, plan.N_draws, stream, demean=plan.demean)
    return gmvp_ensemble(ens).mean(axis=0)


def _iteration(job):
    X, plan, cv, methods, it = job
    i = sample_index(len(X), plan, it)
    tr, te = split_at(i, plan)
    train, test = X[tr], X[te]
    cv_it = replace(cv, seed=int(np.random.SeedSequence([cv.seed, plan.seed, it]).generate_state(1)[0]))
    out = {}
    for k, method in enumerate(methods):
        try:
            w = _window_weights(method, train, plan, cv_it, RngStream(plan.seed, (it, 1 + k)))
            out[method] = (realized_portfolio_sd(w, test), None)
        except (NotPositiveDefinite, np.linalg.LinAlgError, ValueError) as exc:
            out[method] = (math.nan, f"{type(exc).__name__}: {exc}")
    return i, out


def run_backtest(
    data: "ReturnsMatrix | np.ndarray",
    plan: BacktestPlan = BacktestPlan(),
    methods: Sequence[str] = BACKTEST_METHODS,
    cv: CvPlan = CvPlan(objective="gmvp-variance"),
    workers: int = 1,
) -> BacktestReport:
    """Average out-of-sample realized portfolio SD per method over random windows.

    Windows where a method fails (for example a singular sample covariance
    when assets outnumber training rows) are excluded for that method and
    reported, never averaged in.
    """
    bad = [m for m in methods if m not in BACKTEST_METHODS]
    if bad:
        raise ValueError(f"unknown method(s): {', '.join(bad)}")
    X = data.values if isinstance(data, ReturnsMatrix) else np.asarray(data, dtype=float)
    plan.index_range(len(X))
    cv = replace(cv, demean=plan.demean)
    report = BacktestReport({m: [] for m in methods}, {m: [] for m in methods})
    if not methods:
        return report
    jobs = [(X, plan, cv, tuple(methods), it) for it in range(plan.iterations)]
    for it, (i, out) in enumerate(pmap(_iteration, jobs, workers)):
        report.indices.append(i)
        for method, (sd, err) in out.items():
            report.sd[method].append(sd)
            if err is not None:
                report.failures[method].append((it, err))
    for method, fails in report.failures.items():
        if fails:
            warnings.warn(f"{method}: excluded {len(fails)} of {plan.iterations} windows ({fails[0][1]})")
    return report


def block_sparse_truth(p: int, block: int = 10, rho: float = 0.5, vol=(0.05, 0.12), seed: int = 0) -> np.ndarray:
    """Monthly-return covariance with equicorrelated blocks and random volatilities."""
    vols = RngStream(seed, (0,)).generator().uniform(*vol, size=p)
    R = np.eye(p)
    for s in range(0, p, block):
        R[s:s + block, s:s + block] = rho
    np.fill_diagonal(R, 1.0)
    return R * np.outer(vols, vols)


def synthetic_returns(n: int = 120, p: int = 327, mean: float = 0.01, seed: int = 0) -> tuple[ReturnsMatrix, np.ndarray]:
    """Gaussian returns from :func:`block_sparse_truth`; stands in for real monthly data."""
    sigma = block_sparse_truth(p, seed=seed)
    X = sample_mvn(np.full(p, mean), sigma, n, RngStream(seed, (1,)))
    assets = tuple(f"A{j:03d}" for j in range(p))
    periods = tuple(str(d.date()) for d in pd.date_range("2011-05-31", periods=n, freq="ME"))
    return ReturnsMatrix(X, assets, periods), sigma
