"""Write the synthetic backtest fixture: monthly prices for 340 tickers, 13 of
which have gaps, so loading leaves 120 returns x 327 assets.

Usage: python scripts/make_fixture.py [--out data/fixture_prices.csv]
"""

import argparse
from pathlib import Path

import numpy as np
import pandas as pd

from ppp_cov.ingest import load_returns, synthetic_returns

N_GAPPY = 13


def build(seed: int = 0) -> pd.DataFrame:
    r, _ = synthetic_returns(120, 327, seed=seed)
    rng = np.random.default_rng(seed + 1)
    start = pd.Timestamp(r.period_ids[0]) - pd.offsets.MonthEnd(1)
    dates = [str(start.date()), *r.period_ids]
    prices = 50.0 * np.vstack([np.ones(r.shape[1]), np.cumprod(1.0 + r.values, axis=0)])
    frame = pd.DataFrame(prices, index=dates, columns=list(r.asset_ids))
    gappy = rng.uniform(0.8, 1.2, size=(len(dates), N_GAPPY)).cumprod(axis=0) * 30.0
    for k in range(N_GAPPY):
        gappy[rng.integers(len(dates)), k] = np.nan
    extra = pd.DataFrame(gappy, index=dates, columns=[f"G{k:02d}" for k in range(N_GAPPY)])
    frame = pd.concat([frame, extra], axis=1)
    frame.index.name = "date"
    return frame


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("data/fixture_prices.csv"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    build(args.seed).to_csv(args.out, float_format="%.17g")
    loaded = load_returns(args.out, "prices-csv")
    ref, _ = synthetic_returns(120, 327, seed=args.seed)
    err = np.abs(loaded.values - ref.values).max()
    print(f"wrote {args.out}: returns {loaded.shape}, max deviation from generator {err:.2e}")


if __name__ == "__main__":
    main()
