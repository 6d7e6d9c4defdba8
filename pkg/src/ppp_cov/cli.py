"""Command-line entry point: ``ppp-cov <subcommand> ...``.

Every subcommand writes into a fresh run directory (``--out``) together with
``metadata.json`` echoing the resolved configuration. Outputs are staged in a
temporary sibling directory and moved into place only on success.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import shutil
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .gmvp import credible_intervals, gmvp_ensemble, write_intervals, write_weights
from .ingest import BACKTEST_METHODS, BacktestPlan, load_returns, run_backtest
from .ppp import DEFAULT_EPSILON, ThresholdConfig, ensemble_mean, generate_ppp_ensemble, read_ensemble, write_ensemble
from .sampling import RNG_FAMILY, default_prior
from .simbench import METHODS, ExperimentPlan, emit_tables, read_replications, run_experiment, write_replications
from .tuning import OBJECTIVES, CvPlan, cv_select

log = logging.getLogger("ppp_cov")

METHOD_NAMES = {"ppp": "PPP", "iw": "IW", "thres": "Thres", "samplecov": "SampleCov"}
TRUTH_NAMES = {"sigma1": "Sigma1", "sigma2": "Sigma2"}


class UsageError(Exception):
    pass


def _method_list(text: str) -> tuple[str, ...]:
    out = []
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        if tok.lower() not in METHOD_NAMES:
            raise argparse.ArgumentTypeError(f"unknown method {tok!r} (choose from {', '.join(METHOD_NAMES)})")
        out.append(METHOD_NAMES[tok.lower()])
    return tuple(out)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return vals


def _float_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _add_common(sp, workers=True):
    sp.add_argument("--out", required=True, type=Path, help="run directory to create")
    sp.add_argument("--force", action="store_true", help="replace an existing run directory")
    sp.add_argument("--seed", type=int, default=0)
    if workers:
        sp.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")


def _add_cv(sp, objective="cov-spectral"):
    g = sp.add_argument_group("cross-validation")
    g.add_argument("--objective", choices=OBJECTIVES, default=objective)
    g.add_argument("--splits", type=int, default=5)
    g.add_argument("--train-fraction", type=float, default=2 / 3)
    g.add_argument("--grid-size", type=int, default=21, help="points in the default gamma grid")
    g.add_argument("--gamma-grid", type=_float_list, default=None, help="explicit ascending gamma grid")
    g.add_argument("--epsilon-grid", type=_float_list, default=(DEFAULT_EPSILON,))
    g.add_argument("--n-cv", type=int, default=200, help="posterior draws per CV fit")
    g.add_argument("--literal-diagonal", action="store_true",
                   help="threshold diagonal entries too (default keeps the diagonal)")


def _cv_plan(args, demean=False) -> CvPlan:
    return CvPlan(
        n_splits=args.splits,
        train_fraction=args.train_fraction,
        grid_gamma=args.gamma_grid,
        grid_epsilon=args.epsilon_grid,
        objective=args.objective,
        seed=args.seed,
        n_grid=args.grid_size,
        demean=demean,
        preserve_diagonal=not args.literal_diagonal,
    )


def _add_data(sp):
    sp.add_argument("--data", required=True, type=Path, help="CSV: header of asset ids, first column period ids")
    sp.add_argument("--format", choices=("returns-csv", "prices-csv"), default="returns-csv")
    sp.add_argument("--log-returns", action="store_true")
    sp.add_argument("--demean", action=argparse.BooleanOptionalAction, default=True,
                    help="remove column means before forming second moments (default on for real data)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ppp-cov", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="replicated simulation study and tables")
    sp.add_argument("--truth", choices=tuple(TRUTH_NAMES), default="sigma1")
    sp.add_argument("--p", type=int, default=20)
    sp.add_argument("--n", type=_int_list, default=(50, 500), help="comma-separated sample sizes")
    sp.add_argument("--reps", type=int, default=10)
    sp.add_argument("--draws", type=int, default=500)
    sp.add_argument("--methods", type=_method_list, default=METHODS)
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--full-scale", action="store_true", help="p=100, n=50,500,2000, 50 reps, 2000 draws")
    _add_cv(sp)
    _add_common(sp)

    sp = sub.add_parser("estimate", help="draw a post-processed posterior ensemble")
    _add_data(sp)
    sp.add_argument("--gamma", type=float, default=None, help="fixed threshold multiplier (default: tune by CV)")
    sp.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    sp.add_argument("--draws", type=int, default=2000)
    sp.add_argument("--raw", action="store_true", help="skip post-processing (plain inverse-Wishart posterior)")
    _add_cv(sp)
    _add_common(sp)

    sp = sub.add_parser("gmvp", help="GMVP posterior summary of a saved ensemble")
    sp.add_argument("--ensemble", required=True, type=Path)
    sp.add_argument("--level", type=float, default=0.95)
    _add_common(sp, workers=False)

    sp = sub.add_parser("tune", help="cross-validate the threshold parameters")
    _add_data(sp)
    sp.add_argument("--method", choices=("ppp", "thres"), default="ppp")
    _add_cv(sp, objective="gmvp-variance")
    _add_common(sp)

    sp = sub.add_parser("backtest", help="rolling-window out-of-sample GMVP comparison")
    _add_data(sp)
    sp.add_argument("--iterations", type=int, default=20)
    sp.add_argument("--window-train", type=int, default=48)
    sp.add_argument("--window-test", type=int, default=12)
    sp.add_argument("--draws", type=int, default=2000)
    sp.add_argument("--methods", type=_method_list, default=BACKTEST_METHODS)
    _add_cv(sp, objective="gmvp-variance")
    _add_common(sp)

    sp = sub.add_parser("tables", help="rebuild tables from a replications.csv")
    sp.add_argument("--results", required=True, type=Path)
    _add_common(sp, workers=False)
    return ap


def _metadata(args, **extra) -> dict:
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    return {
        "software": {"ppp_cov": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "rng": RNG_FAMILY,
        "args": resolved,
        **extra,
    }


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=list) + "\n")


def cmd_simulate(args, out: Path):
    if args.full_scale:
        args.p, args.n, args.reps, args.draws = 100, (50, 500, 2000), 50, 2000
    plan = ExperimentPlan(TRUTH_NAMES[args.truth], tuple(args.n), args.p, args.reps, args.draws,
                          tuple(args.methods), args.seed, args.n_cv, args.level)
    cv = _cv_plan(args)
    results = run_experiment(plan, cv, workers=args.workers)
    write_replications(results, out / "replications.csv")
    emit_tables(results, out)
    _write_json(out / "metadata.json", _metadata(args, plan=plan.as_dict(), cv=asdict(cv),
                                                 notes="CGM and Bona fide rows are not computed and left blank"))


def _load(args):
    return load_returns(args.data, args.format, args.log_returns)


def cmd_estimate(args, out: Path):
    data = _load(args)
    X = data.values
    n, p = X.shape
    extra = {}
    if args.raw:
        cfg = ThresholdConfig(0.0, n, p, 0.0)
    elif args.gamma is not None:
        cfg = ThresholdConfig(args.gamma, n, p, args.epsilon, preserve_diagonal=not args.literal_diagonal)
    else:
        res = cv_select(X, None, _cv_plan(args, args.demean), args.n_cv, workers=args.workers)
        res.write_csv(out / "cv.csv")
        cfg = res.best
        extra["cv_best"] = asdict(cfg)
    prior = default_prior(X, args.demean)
    ens = generate_ppp_ensemble(prior, X, cfg, args.draws, args.seed, demean=args.demean,
                                raw=args.raw, workers=args.workers)
    write_ensemble(ens, out / "ensemble.csv", assets=data.asset_ids)
    mean = ensemble_mean(ens)
    np.savetxt(out / "mean.csv", mean, fmt="%.17g", delimiter=",", header=",".join(data.asset_ids), comments="")
    _write_json(out / "metadata.json", _metadata(args, config=asdict(cfg), **extra))


def cmd_gmvp(args, out: Path):
    ens, meta = read_ensemble(args.ensemble)
    W = gmvp_ensemble(ens)
    summary = credible_intervals(W, args.level)
    assets = meta.get("assets")
    write_intervals(summary, out / "intervals.csv", assets)
    write_weights(summary.mean, out / "weights.csv", assets)
    _write_json(out / "metadata.json", _metadata(args, ensemble_meta={k: meta[k] for k in ("N", "p", "config")}))


def cmd_tune(args, out: Path):
    X = _load(args).values
    res = cv_select(X, None, _cv_plan(args, args.demean), args.n_cv, method=args.method, workers=args.workers)
    res.write_csv(out / "cv.csv")
    _write_json(out / "metadata.json", _metadata(args, best=asdict(res.best), splits_used=res.splits_used))


def cmd_backtest(args, out: Path):
    data = _load(args)
    plan = BacktestPlan(args.window_train, args.window_test, args.iterations, args.seed,
                        args.draws, args.n_cv, args.demean)
    report = run_backtest(data, plan, args.methods, _cv_plan(args, args.demean), workers=args.workers)
    report.write_csv(out / "table4.csv")
    lines = ["iteration,last_train_row," + ",".join(report.sd)]
    for it, i in enumerate(report.indices):
        vals = ["" if np.isnan(report.sd[m][it]) else f"{report.sd[m][it]:.17g}" for m in report.sd]
        lines.append(",".join([str(it), str(i)] + vals))
    (out / "windows.csv").write_text("\n".join(lines) + "\n")
    _write_json(out / "metadata.json", _metadata(args, plan=asdict(plan), failures=report.failures))


def cmd_tables(args, out: Path):
    emit_tables(read_replications(args.results), out)
    _write_json(out / "metadata.json", _metadata(args))


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "gmvp": cmd_gmvp,
    "tune": cmd_tune,
    "backtest": cmd_backtest,
    "tables": cmd_tables,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out: Path = args.out
    if out.exists() and not args.force:
        ap.error(f"run directory {out} exists; pass --force to replace it")
    if getattr(args, "workers", 1) < 1:
        ap.error("--workers must be >= 1")
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        COMMANDS[args.command](args, stage)
    except Exception as exc:
        shutil.rmtree(stage, ignore_errors=True)
        print(f"ppp-cov {args.command}: error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return 1
    if out.exists():
        shutil.rmtree(out)
    stage.rename(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
