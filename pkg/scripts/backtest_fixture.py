"""Rolling-window GMVP backtest on the synthetic price fixture.

Usage: python scripts/backtest_fixture.py --out runs/backtest_fixture [--full]
Defaults match the reduced acceptance settings; ``--full`` uses 2000 draws,
200 CV draws and the 21-point grid.
"""

import argparse
import sys
from pathlib import Path

from ppp_cov.cli import main as cli_main

HERE = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--data", type=Path, default=HERE / "data" / "fixture_prices.csv")
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--workers", default="1")
    args = ap.parse_args()
    sizes = [] if args.full else ["--draws", "500", "--n-cv", "50", "--grid-size", "11"]
    argv = ["backtest", "--data", str(args.data), "--format", "prices-csv", "--iterations", "20",
            "--methods", "ppp,iw,thres,samplecov", *sizes, "--workers", args.workers,
            "--out", str(args.out), "--force"]
    code = cli_main(argv)
    if code == 0:
        print((args.out / "table4.csv").read_text(), end="")
    return code


if __name__ == "__main__":
    sys.exit(main())
