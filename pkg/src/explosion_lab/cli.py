"""Command-line entry point: ``explosion-lab <subcommand> [options]``.

Exit codes: 0 success, 2 undetermined verdict, 64 usage error, 70 numeric failure.
Options may also come from ``--config FILE`` (flat ``key = value`` lines, keys
named like the long options); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import artifacts, feller, lipschitz, stochastic
from .quadrature import RULE

EXIT_OK, EXIT_UNDETERMINED, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 64, 70
SEED_ENV = "EXPLOSION_LAB_SEED"

log = logging.getLogger("explosion_lab")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(s: str) -> int:
    v = int(float(s))
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {s}")
    return v


def _common(p: argparse.ArgumentParser, default_format: str = "json") -> None:
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=None,
                   help=f"output format (default: from --out suffix, else {default_format})")
    p.add_argument("--seed", type=int, default=None, help=f"master seed (fallback: ${SEED_ENV}, then 0)")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--config", default=None, help="flat key = value file of defaults")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(default_format=default_format)


def _feller_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--zeta", type=float, default=0.0)
    p.add_argument("--convention", choices=feller.CONVENTIONS, default="definition")
    p.add_argument("--kmax", type=int, default=40)
    p.add_argument("--divergence-threshold", type=float, default=500.0)
    p.add_argument("--cauchy-tol", type=float, default=1e-3)
    p.add_argument("--rel-tol", type=float, default=1e-10)


def build_parser() -> Parser:
    parser = Parser(prog="explosion-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("feller", help="Feller explosion test for one lambda")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    _feller_options(p)
    _common(p)

    p = sub.add_parser("sweep", help="Feller test over a log-spaced lambda grid")
    p.add_argument("--grid", required=True, help="start:stop:count (log-spaced)")
    p.add_argument("--figdata", default=None, help="CSV for boundary evidence series")
    _feller_options(p)
    _common(p, "csv")

    p = sub.add_parser("simulate", help="Monte Carlo first-exit ensemble")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--y0", type=float, default=0.0)
    p.add_argument("--paths", type=_positive_int, default=10_000)
    p.add_argument("--dtau", type=float, default=1e-4)
    p.add_argument("--tau-max", type=float, default=50.0)
    p.add_argument("--exit-band", type=float, default=1e-6)
    p.add_argument("--no-drift", action="store_true")
    p.add_argument("--bins", type=_positive_int, default=50)
    p.add_argument("--histogram", default=None, help="CSV path for the exit-time histogram")
    _common(p)

    p = sub.add_parser("lipschitz", help="local Lipschitz constant or global falsification")
    p.add_argument("--interval", type=float, nargs=2, default=(-1.0, 1.0), metavar=("A", "B"))
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--falsify", action="store_true")
    p.add_argument("--K", type=float, default=None)
    p.add_argument("--pairs", type=_positive_int, default=10_000)
    _common(p)

    p = sub.add_parser("xode", help="integrate the deterministic X equation")
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--dtau", type=float, default=1e-3)
    p.add_argument("--tau-max", type=float, default=50.0)
    _common(p, "csv")

    p = sub.add_parser("validate-noise", help="Wiener increment statistics")
    p.add_argument("--n", type=float, default=1e6, help="number of unit-variance increments")
    p.add_argument("--qv-t", type=float, default=10.0)
    p.add_argument("--qv-dtau", type=float, default=1e-4)
    p.add_argument("--n-values", type=float, nargs="+", default=[1e2, 1e4, 1e6])
    p.add_argument("--samples", type=_positive_int, default=100_000)
    _common(p)
    return parser


def _read_config(path: str) -> list[tuple[str, str]]:
    items = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{i}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        items.append((k.replace("_", "-"), v))
    return items


def _config_tokens(parser: Parser, argv: list[str]) -> list[str]:
    """Splice options from --config in front of the explicit flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        parser.error("--config needs a path")
    cmd_pos = next((j for j, a in enumerate(argv) if not a.startswith("-")), None)
    if cmd_pos is None:
        parser.error("missing subcommand")
    subparser = parser._subparsers._group_actions[0].choices.get(argv[cmd_pos])  # noqa: SLF001
    if subparser is None:
        parser.error(f"unknown subcommand {argv[cmd_pos]!r}")
    tokens = []
    for key, value in _read_config(argv[i + 1]):
        opt = f"--{key}"
        if key == "lambda":
            opt = "--lambda"
        action = subparser._option_string_actions.get(opt)  # noqa: SLF001
        if action is None:
            raise UsageError(f"unknown config key {key!r}")
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                tokens.append(opt)
        else:
            tokens.append(opt)
            tokens.extend(value.split())
    return argv[:cmd_pos + 1] + tokens + argv[cmd_pos + 1:]


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer")
    return 0


def _format(args) -> str:
    if args.format:
        return args.format
    if args.out and args.out.endswith(".csv"):
        return "csv"
    if args.out and args.out.endswith(".json"):
        return "json"
    return args.default_format


def _echo(args) -> dict:
    # workers is left out: results, and hence artifacts, do not depend on it.
    skip = {"command", "config", "verbose", "default_format", "out", "format", "figdata",
            "histogram", "workers"}
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items()) if k not in skip}


def _scale_cfg(args, lam: float = 0.0) -> feller.ScaleSpeedConfig:
    try:
        return feller.ScaleSpeedConfig(
            zeta=args.zeta, lam=lam, convention=args.convention, k_max=args.kmax,
            divergence_log_threshold=args.divergence_threshold,
            cauchy_rel_tol=args.cauchy_tol, rel_tol=args.rel_tol,
        )
    except ValueError as exc:
        raise UsageError(str(exc))


def limit_dict(lim: feller.BoundaryLimit) -> dict:
    return {
        "kind": lim.kind,
        "side": lim.side,
        "sign": lim.sign,
        "value": artifacts.logvalue_fields(lim.value),
        "reason": lim.reason,
        "evidence": [{"x": x, **artifacts.logvalue_fields(v)} for x, v in lim.evidence],
    }


def verdict_dict(v: feller.FellerVerdict) -> dict:
    return {
        "lambda": v.lam,
        "zeta": v.config.zeta,
        "convention": v.config.convention,
        "condition_met": v.condition_met,
        "explodes_wp1": v.explodes_wp1,
        "quadrature_rule": RULE,
        "limits": {
            "p_left": limit_dict(v.p_limit_left),
            "p_right": limit_dict(v.p_limit_right),
            "v_left": limit_dict(v.v_limit_left),
            "v_right": limit_dict(v.v_limit_right),
        },
        "notes": list(v.notes),
    }


_LIMITS = (("p", "left", "p_limit_left"), ("p", "right", "p_limit_right"),
           ("v", "left", "v_limit_left"), ("v", "right", "v_limit_right"))


def cmd_feller(args) -> int:
    seed = _seed(args)
    if not math.isfinite(args.lam):
        raise UsageError("--lambda must be finite")
    verdict = feller.feller_test(args.lam, _scale_cfg(args))
    meta = artifacts.metadata("feller", _echo(args), seed, args.convention)
    if _format(args) == "json":
        text = artifacts.dumps_json(meta, verdict_dict(verdict))
    else:
        meta["verdict"] = {"condition_met": verdict.condition_met, "explodes_wp1": verdict.explodes_wp1}
        rows = []
        for q, side, attr in _LIMITS:
            lim = getattr(verdict, attr)
            for k, (x, v) in enumerate(lim.evidence, 1):
                f = artifacts.logvalue_fields(v)
                rows.append((q, side, lim.kind, k, x, f["sign"], f["log10_magnitude"]))
        text = artifacts.dumps_csv(meta, ["quantity", "side", "limit_kind", "k", "x_k", "sign",
                                          "log10_magnitude"], rows)
    artifacts.write_text(args.out, text)
    return EXIT_UNDETERMINED if verdict.explodes_wp1 is None else EXIT_OK


def parse_grid(text: str) -> list[float]:
    try:
        start, stop, count = text.split(":")
        start, stop, n = float(start), float(stop), int(float(count))
    except ValueError:
        raise UsageError(f"grid must be start:stop:count, got {text!r}")
    if n < 1:
        raise UsageError("grid is empty")
    if n == 1:
        return [start]
    if start == stop:
        return [start] * n
    if start <= 0 or stop <= 0:
        raise UsageError("log-spaced grid needs positive endpoints")
    return [float(x) for x in np.geomspace(start, stop, n)]


def _figdata_rows(entry: feller.SweepEntry):
    v = entry.verdict
    for p_lim, v_lim in ((v.p_limit_left, v.v_limit_left), (v.p_limit_right, v.v_limit_right)):
        for (x, pv), (_, vv) in zip(p_lim.evidence, v_lim.evidence):
            pf, vf = artifacts.logvalue_fields(pv), artifacts.logvalue_fields(vv)
            try:
                finite = vv.to_float()
            except OverflowError:
                finite = None
            yield (entry.lam, x, pf["sign"], pf["log10_magnitude"], vf["sign"],
                   vf["log10_magnitude"], finite)


def cmd_sweep(args) -> int:
    seed = _seed(args)
    grid = parse_grid(args.grid)
    entries = feller.lambda_sweep(grid, _scale_cfg(args), workers=args.workers)
    meta = artifacts.metadata("sweep", _echo(args), seed, args.convention)
    rows = []
    for e in entries:
        if e.verdict is None:
            rows.append((e.lam, "error", None, None, None, None, None, e.error))
            continue
        v = e.verdict
        rows.append((e.lam, v.condition_met, v.explodes_wp1, v.p_limit_left.kind, v.p_limit_right.kind,
                     v.v_limit_left.kind, v.v_limit_right.kind, None))
    header = ["lambda", "condition_met", "explodes_wp1", "p_left", "p_right", "v_left", "v_right", "error"]
    if _format(args) == "json":
        text = artifacts.dumps_json(meta, [dict(zip(header, r)) for r in rows])
    else:
        text = artifacts.dumps_csv(meta, header, rows)
    artifacts.write_text(args.out, text)

    figdata = args.figdata
    if figdata is None and args.out not in (None, "-"):
        out = Path(args.out)
        figdata = str(out.with_name(out.stem + "_figdata.csv"))
    if figdata:
        fig_rows = [r for e in entries if e.verdict is not None for r in _figdata_rows(e)]
        artifacts.write_text(figdata, artifacts.dumps_csv(
            meta, ["lambda", "x_k", "p_sign", "log10_p", "v_sign", "log10_v", "v_finite_value"], fig_rows))
    if any(e.verdict is None for e in entries):
        return EXIT_NUMERIC
    if any(e.verdict.explodes_wp1 is None for e in entries):
        return EXIT_UNDETERMINED
    return EXIT_OK


def cmd_simulate(args) -> int:
    seed = _seed(args)
    try:
        cfg = stochastic.PathConfig(y0=args.y0, lam=args.lam, dtau=args.dtau, tau_max=args.tau_max,
                                    exit_band=args.exit_band, drift_enabled=not args.no_drift)
    except ValueError as exc:
        raise UsageError(str(exc))
    process = stochastic.NoiseProcess(seed, cfg.effective_dtau)
    stats = stochastic.simulate_ensemble(cfg, args.paths, process, workers=args.workers, bins=args.bins)
    meta = artifacts.metadata("simulate", _echo(args), seed)
    result = stats.as_dict()
    if _format(args) == "json":
        text = artifacts.dumps_json(meta, result)
    else:
        scalars = [(k, v) for k, v in result.items() if not isinstance(v, list)]
        text = artifacts.dumps_csv(meta, ["statistic", "value"], scalars)
    artifacts.write_text(args.out, text)
    if args.histogram:
        edges, counts = stats.hist_edges, stats.hist_counts
        rows = [(edges[i], edges[i + 1], counts[i]) for i in range(len(counts))]
        artifacts.write_text(args.histogram,
                             artifacts.dumps_csv(meta, ["bin_left", "bin_right", "count"], rows))
    if stats.n_invalid:
        print(f"explosion-lab: {stats.n_invalid} path(s) overflowed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_lipschitz(args) -> int:
    seed = _seed(args)
    meta = artifacts.metadata("lipschitz", _echo(args), seed)
    if args.falsify:
        if args.K is None or not args.K > 0:
            raise UsageError("--falsify needs --K > 0")
        x, y = lipschitz.global_lipschitz_falsify(args.lam, args.K)
        result = {"mode": "falsify", "lambda": args.lam, "K": args.K, "x": x, "y": y,
                  "quotient": abs(float(stochastic.drift(x, args.lam) - stochastic.drift(y, args.lam))) / abs(x - y)}
    else:
        a, b = args.interval
        if not (math.isfinite(a) and math.isfinite(b)) or a > b:
            raise UsageError(f"malformed interval [{a}, {b}]")
        rep = lipschitz.local_lipschitz_constant(a, b, args.lam, n_pairs=args.pairs, seed=seed)
        result = {"mode": "local", **artifacts.to_jsonable(rep)}
    if _format(args) == "json":
        text = artifacts.dumps_json(meta, result)
    else:
        flat = [(k, v if not isinstance(v, list) else " ".join(repr(float(t)) for t in v))
                for k, v in result.items()]
        text = artifacts.dumps_csv(meta, ["field", "value"], flat)
    artifacts.write_text(args.out, text)
    return EXIT_OK


def cmd_xode(args) -> int:
    seed = _seed(args)
    if not abs(args.x0) < 1:
        raise UsageError(f"|x0| must be < 1, got {args.x0}")
    res = stochastic.integrate_x_ode(args.x0, args.lam, args.dtau, args.tau_max)
    meta = artifacts.metadata("xode", _echo(args), seed)
    meta["termination"] = res.flag
    if _format(args) == "json":
        text = artifacts.dumps_json(meta, {"flag": res.flag, "rejected_steps": res.rejected_steps,
                                           "tau": res.tau, "X": res.X})
    else:
        text = artifacts.dumps_csv(meta, ["tau", "X"], zip(res.tau.tolist(), res.X.tolist()))
    artifacts.write_text(args.out, text)
    return EXIT_OK


def noise_report(seed: int, n: int, qv_t: float, qv_dtau: float, n_values, samples: int) -> dict:
    unit = stochastic.NoiseProcess(seed, 1.0)
    dw = stochastic.wiener_increments(unit, n)
    mean, var = float(dw.mean()), float(dw.var(ddof=1))
    qv = stochastic.quadratic_variation(stochastic.NoiseProcess(seed, qv_dtau, 1), qv_t)
    dq = stochastic.diff_quotient_stat(stochastic.NoiseProcess(seed, 1.0, 2), n_values, samples)
    return {
        "n": n,
        "mean": mean,
        "mean_bound": 5.0 / math.sqrt(n),
        "mean_ok": abs(mean) < 5.0 / math.sqrt(n),
        "variance": var,
        "variance_ok": abs(var - 1.0) < 0.01,
        "qv_t": qv_t,
        "quadratic_variation": qv,
        "qv_ok": abs(qv - qv_t) < 0.01 * qv_t,
        "diff_quotient_n": list(dq.n_values),
        "diff_quotient_std": list(dq.stds),
        "diff_quotient_std_over_sqrt_n": list(dq.std_over_sqrt_n),
        "diff_quotient_slope": dq.slope,
        "slope_ok": abs(dq.slope - 0.5) <= 0.01,
    }


def cmd_validate_noise(args) -> int:
    seed = _seed(args)
    n = int(args.n)
    if n < 1:
        raise UsageError("--n must be >= 1")
    result = noise_report(seed, n, args.qv_t, args.qv_dtau, args.n_values, args.samples)
    meta = artifacts.metadata("validate-noise", _echo(args), seed)
    if _format(args) == "json":
        text = artifacts.dumps_json(meta, result)
    else:
        scalars = [(k, v) for k, v in result.items() if not isinstance(v, list)]
        text = artifacts.dumps_csv(meta, ["statistic", "value"], scalars)
    artifacts.write_text(args.out, text)
    return EXIT_OK


COMMANDS = {
    "feller": cmd_feller,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "lipschitz": cmd_lipschitz,
    "xode": cmd_xode,
    "validate-noise": cmd_validate_noise,
}


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        try:
            argv = _config_tokens(parser, argv)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}")
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
        args.seed = _seed(args)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"explosion-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, stochastic.InvalidPathError) as exc:
        print(f"explosion-lab: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
