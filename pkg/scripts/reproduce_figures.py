"""Boundary-sequence data for the lambda sweep, one CSV per sign convention.

Writes <outdir>/sweep_<convention>.csv (verdict table) and
<outdir>/sweep_<convention>_figdata.csv (log10 |p| and log10 v at every x_k),
which is what the scale-function and speed-integral plots are drawn from.

    python scripts/reproduce_figures.py --outdir results --workers 4
"""

import argparse
from pathlib import Path

from explosion_lab.cli import main as cli_main


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--grid", default="1e2:1e6:9", help="start:stop:count, log-spaced")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--plot", action="store_true", help="also draw PNGs (needs matplotlib)")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for conv in ("definition", "paper_expanded"):
        table = out / f"sweep_{conv}.csv"
        code = cli_main(["sweep", "--grid", args.grid, "--convention", conv,
                         "--workers", str(args.workers), "--out", str(table)])
        print(f"{conv}: exit {code} -> {table}")
        if args.plot:
            _plot(out / f"sweep_{conv}_figdata.csv", out / f"sweep_{conv}.png")


def _plot(figdata: Path, png: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from explosion_lab.artifacts import read_csv

    _, rows = read_csv(figdata)
    fig, (ax_p, ax_v) = plt.subplots(1, 2, figsize=(10, 4))
    for lam in sorted({r["lambda"] for r in rows}):
        sel = [r for r in rows if r["lambda"] == lam and r["x_k"] > 0]
        xs = [1 - r["x_k"] for r in sel]
        ax_p.plot(xs, [r["log10_p"] for r in sel], label=f"{lam:.0e}")
        ax_v.plot(xs, [r["log10_v"] for r in sel], label=f"{lam:.0e}")
    for ax, name in ((ax_p, "log10 |p(x_k)|"), (ax_v, "log10 v(x_k)")):
        ax.set_xscale("log")
        ax.set_xlabel("1 - x_k")
        ax.set_ylabel(name)
    ax_p.legend(title="lambda", fontsize=7)
    fig.tight_layout()
    fig.savefig(png, dpi=120)
    print(f"  plot -> {png}")


if __name__ == "__main__":
    main()
