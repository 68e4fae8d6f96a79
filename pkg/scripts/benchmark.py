"""Time one agent's online step against the exact solution over market sizes.

    python3 scripts/benchmark.py [--scenario electricity] [--reps 10] [--n 4 6 8 10]
"""

import argparse

from coalitiond.metrics import benchmark_step_cost


def main():
    parser = argparse.ArgumentParser(description="online step versus exact solution timing")
    parser.add_argument("--scenario", choices=["electricity", "forecast"], default="electricity")
    parser.add_argument("--reps", type=int, default=10)
    parser.add_argument("--n", type=int, nargs="+", default=[4, 6, 8, 10])
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rows = benchmark_step_cost(tuple(args.n), args.scenario, reps=args.reps, seed=args.seed)
    print(f"{'N':>3} {'online_ms':>10} {'exact_ms':>10} {'ratio':>8}")
    for r in rows:
        print(f"{r['N']:3d} {1e3 * r['online_step_seconds']:10.3f} "
              f"{1e3 * r['exact_solution_seconds']:10.2f} {r['ratio']:8.1f}")


if __name__ == "__main__":
    main()
