"""Simulation study: block-sparse truths, replicated method comparison, tables.

Block ``k`` (0-based) covers rows/columns ``10k .. 10k + 9``, i.e. the 1-based
range ``10k + 1 .. 10k + 10``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ._parallel import pmap
from .estimators import pd_fallback, sample_covariance, thresholded_sample_cov
from .gmvp import (
    IntervalSummary,
    coverage,
    credible_intervals,
    gmvp_ensemble,
    gmvp_weights,
    relative_cov_error,
    relative_gmvp_error,
    write_intervals,
)
from .linalg import NotPositiveDefinite, as_cov, min_eig
from .ppp import ThresholdConfig, ensemble_mean, generate_ppp_ensemble
from .sampling import RngStream, default_prior, sample_mvn
from .tuning import CvPlan, cv_select_many

log = logging.getLogger(__name__)

METHODS = ("PPP", "IW", "Thres", "SampleCov")
BAYESIAN = ("PPP", "IW")
BLOCK = 10
SIGMA2_LEVELS = (0.25, 0.5, 1.0, 2.0, 4.0)

# fixed row layouts of the three tables; CGM and Bona fide are never computed
TABLE_ROWS = {
    "table1_cov_error": [("PPP", "PPP"), ("CGM", None), ("IW", "IW"), ("Thres", "Thres"), ("Sample cov", "SampleCov")],
    "table2_gmvp_error": [("PPP", "PPP"), ("CGM", None), ("IW", "IW"), ("Thres", "Thres"), ("Bona fide", None)],
    "table3_coverage": [("PPP", "PPP"), ("CGM", None), ("IW", "IW")],
}
TABLE_METRIC = {
    "table1_cov_error": "cov_error",
    "table2_gmvp_error": "gmvp_error",
    "table3_coverage": "coverage",
}


def _blocks(p: int, value_of_block) -> np.ndarray:
    if p < BLOCK or p % BLOCK:
        raise ValueError(f"p must be a positive multiple of {BLOCK}, got {p}")
    m = np.zeros((p, p))
    for k in range(p // BLOCK):
        s = slice(BLOCK * k, BLOCK * (k + 1))
        m[s, s] = value_of_block(k)
    return m + 0.1 * np.eye(p)


def build_sigma1(p: int = 100) -> np.ndarray:
    """Blocks of 0.1 (even k) and 4 (odd k), plus ``0.1 I``."""
    return _blocks(p, lambda k: 0.1 if k % 2 == 0 else 4.0)


def build_sigma2(p: int = 100) -> np.ndarray:
    """Blocks cycling 0.25, 0.5, 1, 2, 4 with period five, plus ``0.1 I``."""
    return _blocks(p, lambda k: SIGMA2_LEVELS[k % 5])


TRUTHS = {"Sigma1": build_sigma1, "Sigma2": build_sigma2}


@dataclass(frozen=True)
class SparsityClassParams:
    q: float
    c_np: float
    M0: float
    M1: float

    def __post_init__(self):
        if not 0 <= self.q < 1:
            raise ValueError("q must be in [0, 1)")
        if min(self.c_np, self.M0, self.M1) <= 0:
            raise ValueError("c_np, M0, M1 must be positive")


def check_gq_membership(m, params: SparsityClassParams) -> tuple[bool, str]:
    """Test membership in the sparse class; returns ``(member, report)``.

    Each column's off-diagonal entries must lie in the weak-lq ball
    (``|x|_(k)^q <= c / k``; for ``q = 0`` the nonzero count must be ``<= c``),
    every diagonal entry must be ``<= M0`` and the smallest eigenvalue ``> M1``.
    """
    a = as_cov(m)
    p = a.shape[0]
    k = np.arange(1, p)
    for j in range(p):
        xi = np.sort(np.abs(np.delete(a[:, j], j)))[::-1]
        if params.q == 0:
            nnz = int(np.count_nonzero(xi))
            if nnz > params.c_np:
                return False, f"column {j}: {nnz} nonzero off-diagonals exceed c_np = {params.c_np:g}"
        else:
            bad = np.flatnonzero(xi ** params.q > params.c_np / k)
            if bad.size:
                return False, f"column {j}: weak-lq bound fails at k = {bad[0] + 1}"
    diag = np.diag(a)
    if diag.max() > params.M0:
        j = int(np.argmax(diag))
        return False, f"diagonal entry {j} = {diag[j]:g} exceeds M0 = {params.M0:g}"
    lam = min_eig(a)
    if not lam > params.M1:
        return False, f"minimum eigenvalue {lam:g} is not above M1 = {params.M1:g}"
    return True, "member"


@dataclass(frozen=True)
class ExperimentPlan:
    truth_id: str = "Sigma1"
    n_list: tuple[int, ...] = (50, 500)
    p: int = 20
    replications: int = 10
    N_draws: int = 500
    methods: tuple[str, ...] = METHODS
    seed: int = 0
    n_cv: int = 200
    level: float = 0.95
    custom_truth: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.n_list:
            raise ValueError("n_list must be nonempty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown method(s): {', '.join(bad)}")
        if self.truth_id not in (*TRUTHS, "custom"):
            raise ValueError(f"unknown truth {self.truth_id!r}")
        if self.truth_id == "custom" and self.custom_truth is None:
            raise ValueError("custom truth requires custom_truth")

    def truth(self) -> np.ndarray:
        if self.truth_id == "custom":
            return as_cov(self.custom_truth)
        return TRUTHS[self.truth_id](self.p)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("custom_truth")
        return d


@dataclass
class ExperimentResults:
    rows: list[dict]
    intervals: dict = field(default_factory=dict)  # (method, truth, n) -> (IntervalSummary, truth weights)
    plan: Optional[dict] = None

    def summary(self) -> list[dict]:
        """Mean metric per (truth, method, n), ignoring infeasible (NaN) cells."""
        groups: dict = {}
        for r in self.rows:
            groups.setdefault((r["truth"], r["method"], r["n"]), []).append(r)
        out = []
        for (truth, method, n), rs in groups.items():
            rec = {"truth": truth, "method": method, "n": n, "replications": len(rs)}
            for metric in ("cov_error", "gmvp_error", "coverage"):
                vals = np.array([r[metric] for r in rs], dtype=float)
                ok = vals[~np.isnan(vals)]
                rec[metric] = float(ok.mean()) if ok.size else math.nan
            out.append(rec)
        return out


def _derived_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def _bayes_gmvp(ens, w_true, level):
    W = gmvp_ensemble(ens)
    summary = credible_intervals(W, level)
    return relative_gmvp_error(w_true, W.mean(axis=0)), coverage(summary, w_true), summary


def _replication(job) -> tuple[list[dict], dict]:
    plan, cv, n, rep = job
    sigma0 = plan.truth()
    p = sigma0.shape[0]
    w_true = gmvp_weights(sigma0)
    stream = RngStream(plan.seed, (n, rep))
    X = sample_mvn(np.zeros(p), sigma0, n, stream.child(0))
    cv_rep = replace(cv, seed=_derived_seed(cv.seed, plan.seed, n, rep))
    rows, intervals = [], {}

    def record(method, cov_err, gmvp_err, cov_pct=math.nan, gamma_cov=math.nan, gamma_gmvp=math.nan):
        rows.append({
            "truth": plan.truth_id, "method": method, "n": n, "rep": rep,
            "cov_error": cov_err, "gmvp_error": gmvp_err, "coverage": cov_pct,
            "gamma_cov": gamma_cov, "gamma_gmvp": gamma_gmvp,
        })

    for method in plan.methods:
        try:
            if method == "SampleCov":
                S = sample_covariance(X)
                try:
                    g_err = relative_gmvp_error(w_true, gmvp_weights(S))
                except NotPositiveDefinite:
                    g_err = math.nan
                record(method, relative_cov_error(sigma0, S), g_err)
            elif method == "IW":
                cfg = ThresholdConfig(0.0, n, p, 0.0)
                ens = generate_ppp_ensemble(default_prior(X), X, cfg, plan.N_draws, stream.child(1), raw=True)
                g_err, cov_pct, summary = _bayes_gmvp(ens, w_true, plan.level)
                intervals[(method, plan.truth_id, n)] = (summary, w_true)
                record(method, relative_cov_error(sigma0, ensemble_mean(ens)), g_err, cov_pct)
            elif method == "Thres":
                both = cv_select_many(X, None, cv_rep, method="thres")
                res_c, res_g = both["cov-spectral"], both["gmvp-variance"]
                T = thresholded_sample_cov(X, res_c.best).matrix
                Tg = pd_fallback(thresholded_sample_cov(X, res_g.best).matrix, res_g.best.epsilon)
                record(method, relative_cov_error(sigma0, T), relative_gmvp_error(w_true, gmvp_weights(Tg)),
                       gamma_cov=res_c.best.gamma, gamma_gmvp=res_g.best.gamma)
            elif method == "PPP":
                both = cv_select_many(X, None, cv_rep, plan.n_cv)
                res_c, res_g = both["cov-spectral"], both["gmvp-variance"]
                prior = default_prior(X)
                ens_c = generate_ppp_ensemble(prior, X, res_c.best, plan.N_draws, stream.child(2))
                ens_g = generate_ppp_ensemble(prior, X, res_g.best, plan.N_draws, stream.child(3))
                g_err, cov_pct, summary = _bayes_gmvp(ens_g, w_true, plan.level)
                intervals[(method, plan.truth_id, n)] = (summary, w_true)
                record(method, relative_cov_error(sigma0, ensemble_mean(ens_c)), g_err, cov_pct,
                       res_c.best.gamma, res_g.best.gamma)
        except Exception as exc:
            raise RuntimeError(f"method={method} n={n} replication={rep}: {exc}") from exc
    return rows, (intervals if rep == 0 else {})


def run_experiment(plan: ExperimentPlan, cv: CvPlan = CvPlan(), workers: int = 1) -> ExperimentResults:
    """Run every (n, replication) job; output is independent of ``workers``."""
    jobs = [(plan, cv, n, rep) for n in plan.n_list for rep in range(plan.replications)]
    rows, intervals = [], {}
    for r, iv in pmap(_replication, jobs, workers):
        rows.extend(r)
        intervals.update(iv)
    return ExperimentResults(rows, intervals, {"plan": plan.as_dict(), "cv": asdict(cv)})


ROW_FIELDS = ["truth", "method", "n", "rep", "cov_error", "gmvp_error", "coverage", "gamma_cov", "gamma_gmvp"]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(v)
    if isinstance(v, str):
        return v
    return "" if v is None or math.isnan(v) else f"{v:.17g}"


def write_replications(results: ExperimentResults, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_FIELDS)
        for r in results.rows:
            w.writerow([_fmt(r[k]) for k in ROW_FIELDS])
    return path


def read_replications(path) -> ExperimentResults:
    rows = []
    with Path(path).open(newline="") as fh:
        for r in csv.DictReader(fh):
            rec = {"truth": r["truth"], "method": r["method"], "n": int(r["n"]), "rep": int(r["rep"])}
            for k in ROW_FIELDS[4:]:
                rec[k] = float(r[k]) if r[k] != "" else math.nan
            rows.append(rec)
    return ExperimentResults(rows)


def emit_tables(results: ExperimentResults, out_dir) -> list[Path]:
    """Write the three method-by-(truth, n) tables, a long-form summary, and
    per-asset interval files for the first replication."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = results.summary()
    cells = {(s["method"], s["truth"], s["n"]): s for s in summary}
    cols = sorted({(s["truth"], s["n"]) for s in summary})
    written = []
    for name, layout in TABLE_ROWS.items():
        path = out / f"{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method"] + [f"{t}:n={n}" for t, n in cols])
            if summary:
                for label, method in layout:
                    vals = [cells.get((method, t, n), {}).get(TABLE_METRIC[name], math.nan) for t, n in cols]
                    w.writerow([label] + [_fmt(v) for v in vals])
        written.append(path)
    path = out / "summary.csv"
    fields = ["truth", "method", "n", "replications", "cov_error", "gmvp_error", "coverage"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for s in sorted(summary, key=lambda s: (s["truth"], METHODS.index(s["method"]), s["n"])):
            w.writerow([_fmt(s[k]) for k in fields])
    written.append(path)
    for (method, truth, n), (iv, w_true) in sorted(results.intervals.items()):
        written.append(write_intervals(iv, out / f"gmvp_intervals_{method}_{truth}_n{n}.csv", truth=w_true))
    return written
