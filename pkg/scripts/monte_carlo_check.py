"""Compare Monte Carlo exit statistics with the Feller verdict over a few lambdas.

    python scripts/monte_carlo_check.py --paths 10000 --workers 4
"""

import argparse

from explosion_lab import NoiseProcess, PathConfig, feller_test, simulate_ensemble


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.0, 1.0, 10.0, -10.0])
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--dtau", type=float, default=1e-4)
    ap.add_argument("--tau-max", type=float, default=50.0)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    print(f"{'lambda':>8} {'feller':>8} {'exit frac':>10} {'mean S':>8} {'+-':>7} {'left':>6} {'right':>6}")
    for lam in args.lambdas:
        verdict = feller_test(lam)
        cfg = PathConfig(y0=0.0, lam=lam, dtau=args.dtau, tau_max=args.tau_max)
        s = simulate_ensemble(cfg, args.paths, NoiseProcess(args.seed, cfg.effective_dtau),
                              workers=args.workers)
        err = s.mean_exit_time_stderr or float("nan")
        print(f"{lam:8g} {verdict.condition_met:>8} {s.exit_fraction:10.4f} {s.mean_exit_time:8.4f} "
              f"{err:7.4f} {s.exit_left:6d} {s.exit_right:6d}")


if __name__ == "__main__":
    main()
