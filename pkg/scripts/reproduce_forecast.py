"""Forecasting market: terminal mean cumulative Shapley tracking error per step size.

    python3 scripts/reproduce_forecast.py [--alphas 0.1 0.05 0.01] [--out out]
"""

import argparse
import json

from coalitiond.cli import RunConfig, run
from coalitiond.tracking import TrackerConfig


def main():
    parser = argparse.ArgumentParser(description="forecast market tracking error")
    parser.add_argument("--alphas", type=float, nargs="+", default=[0.1, 0.05, 0.01])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out")
    args = parser.parse_args()

    print(f"{'alpha':>7} {'stacked':>9} {'averaged':>9} {'runtime_s':>10}")
    for alpha in args.alphas:
        cfg = RunConfig(scenario="forecast", seed=args.seed, output_root=args.out,
                        tag=f"alpha_{alpha:g}", tracker_config=TrackerConfig(alpha=alpha))
        summary = json.loads((run(cfg) / "summary.json").read_text())
        print(f"{alpha:7.3f} {summary['terminal_mean_cum_error']:9.4f} "
              f"{summary['terminal_mean_cum_error_averaged']:9.4f} {summary['runtime']:10.1f}")


if __name__ == "__main__":
    main()
