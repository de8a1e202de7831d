"""Feller's explosion test for dY = (Y^2 - 1)(3Y + lam) dtau + dW on (-1, 1).

The scale density is p'(x) = exp(-2 (A(x) - A(zeta))) with A an antiderivative of
the drift, and

    p(x) = int_zeta^x p'(s) ds,
    v(x) = int_zeta^x p'(y) int_zeta^y 2 / p'(z) dz dy      (sigma = 1).

Every quantity is a LogValue because p' reaches about exp(4 |lam| / 3) near a boundary.

Two antiderivative conventions are supported.  ``definition`` is the true
antiderivative of the drift.  ``paper_expanded`` is the polynomial printed in the
published expanded formula, whose lam terms have the opposite sign; it equals the
``definition`` polynomial at -lam.
"""

from __future__ import annotations

import bisect
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .quadrature import (
    LogValue,
    QuadratureResult,
    gk15_panels,
    integrate_exp_poly,
    log_integrate,
    poly_log_integrand,
)

log = logging.getLogger(__name__)

CONVENTIONS = ("definition", "paper_expanded")
LOG2 = math.log(2.0)

ANALYTIC_NOTE = (
    "p' is continuous on the closed interval [-1, 1] for finite lam, so p(+-1) and "
    "v(+-1) are finite analytically; a 'divergent' limit here means the magnitude "
    "exceeds the numerical divergence threshold and is still growing."
)
CONVENTION_NOTE = (
    "paper_expanded uses the printed expansion 3x^4/4 - lam x^3/3 - 3x^2/2 + lam x, "
    "which is the antiderivative of (x^2-1)(3x-lam), i.e. the definition convention "
    "at -lam."
)


@dataclass(frozen=True)
class ScaleSpeedConfig:
    zeta: float = 0.0
    lam: float = 0.0
    convention: str = "definition"
    k_max: int = 40
    divergence_log_threshold: float = 500.0
    cauchy_rel_tol: float = 1e-3
    rel_tol: float = 1e-10
    cauchy_tail: int = 3

    def __post_init__(self):
        if not -1.0 < self.zeta < 1.0:
            raise ValueError(f"zeta must lie in (-1, 1), got {self.zeta}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}, got {self.convention!r}")
        if self.k_max < 2:
            raise ValueError("k_max must be >= 2")
        if not math.isfinite(self.lam):
            raise ValueError("lam must be finite")

    def boundary_sequence(self, side: int) -> np.ndarray:
        """x_k = side * (1 - 2**-k), k = 1..k_max."""
        if side not in (-1, 1):
            raise ValueError("side must be -1 or +1")
        k = np.arange(1, self.k_max + 1, dtype=float)
        return side * (1.0 - 2.0**-k)


def antiderivative_coeffs(lam: float, convention: str = "definition") -> np.ndarray:
    """Ascending coefficients of the drift antiderivative (zero at the origin)."""
    if convention == "definition":
        return np.array([0.0, -lam, -1.5, lam / 3.0, 0.75])
    if convention == "paper_expanded":
        return np.array([0.0, lam, -1.5, -lam / 3.0, 0.75])
    raise ValueError(f"unknown convention {convention!r}")


def drift_antiderivative(x, lam: float, convention: str = "definition"):
    return np.polynomial.polynomial.polyval(x, antiderivative_coeffs(lam, convention))


def log_scale_density_coeffs(cfg: ScaleSpeedConfig) -> np.ndarray:
    c = -2.0 * antiderivative_coeffs(cfg.lam, cfg.convention)
    c[0] = 2.0 * float(drift_antiderivative(cfg.zeta, cfg.lam, cfg.convention))
    return c


def log_scale_density(x, cfg: ScaleSpeedConfig):
    """log p'(x) = -2 (A(x) - A(zeta))."""
    A = antiderivative_coeffs(cfg.lam, cfg.convention)
    pv = np.polynomial.polynomial.polyval
    return -2.0 * (pv(x, A) - pv(cfg.zeta, A))


def _same_side_further(prev: float, x: float, zeta: float) -> bool:
    return (prev - zeta) * (x - zeta) > 0 and abs(prev - zeta) <= abs(x - zeta)


def _combine(results: list[QuadratureResult], value: LogValue) -> QuadratureResult:
    err = LogValue.zero()
    for r in results:
        err = err + r.abs_error_estimate
    return QuadratureResult(
        value=value,
        abs_error_estimate=err,
        panels=sum(r.panels for r in results),
        converged=all(r.converged for r in results),
    )


class ScaleFunction:
    """p(x) for a fixed configuration; ``along`` accumulates over an ordered sequence."""

    def __init__(self, cfg: ScaleSpeedConfig):
        self.cfg = cfg
        self.coeffs = log_scale_density_coeffs(cfg)

    def result(self, x: float) -> QuadratureResult:
        if not -1.0 <= x <= 1.0:
            raise ValueError(f"x must lie in [-1, 1], got {x}")
        return integrate_exp_poly(self.coeffs, self.cfg.zeta, x, self.cfg.rel_tol)

    def __call__(self, x: float) -> LogValue:
        return self.result(x).value

    def along(self, xs) -> list[QuadratureResult]:
        out: list[QuadratureResult] = []
        prev_x: Optional[float] = None
        for x in map(float, xs):
            if prev_x is not None and _same_side_further(prev_x, x, self.cfg.zeta):
                piece = integrate_exp_poly(self.coeffs, prev_x, x, self.cfg.rel_tol)
                prev = out[-1]
                out.append(_combine([prev, piece], prev.value + piece.value))
            else:
                out.append(self.result(x))
            prev_x = x
        return out


class SpeedIntegral:
    """v(x) for a fixed configuration.

    The inner integral |int_zeta^y 2/p'(z) dz| is needed at every outer node.  It
    is built incrementally from cached anchor points between zeta and y, so each
    evaluation only integrates the short gap from the nearest anchor.
    """

    PIECE_RTOL = 1e-13

    def __init__(self, cfg: ScaleSpeedConfig):
        self.cfg = cfg
        self.log_pprime = poly_log_integrand(log_scale_density_coeffs(cfg))
        inner = -log_scale_density_coeffs(cfg)
        inner[0] += LOG2
        self.log_inner_integrand = poly_log_integrand(inner)
        # Per side: sorted keys side*y and the matching log |I(y)|.
        outer = lambda ys: self.log_outer_integrand(ys)  # noqa: E731
        outer.noise = self._outer_noise
        self._outer = outer
        self._keys = {1: [cfg.zeta], -1: [-cfg.zeta]}
        self._logs = {1: [-math.inf], -1: [-math.inf]}
        self.inner_converged = True

    def _log_abs_inner(self, ys: np.ndarray) -> np.ndarray:
        zeta = self.cfg.zeta
        out = np.full(ys.shape, -math.inf)
        for side in (1, -1):
            mask = (ys - zeta) * side > 0
            if mask.any():
                out[mask] = self._inner_one_side(ys[mask], side)
        return out

    def _inner_one_side(self, ys: np.ndarray, side: int) -> np.ndarray:
        keys, logs = self._keys[side], self._logs[side]
        order = np.argsort(side * ys, kind="stable")
        ys_sorted = ys[order]
        j = bisect.bisect_right(keys, side * ys_sorted[0]) - 1
        start = side * keys[j]
        pts = np.concatenate([[start], ys_sorted])
        lo = np.minimum(pts[:-1], pts[1:])
        hi = np.maximum(pts[:-1], pts[1:])
        piece_val, piece_err = gk15_panels(self.log_inner_integrand, lo, hi)
        bad = piece_err > np.log(self.PIECE_RTOL) + piece_val
        for i in np.flatnonzero(bad):
            r = log_integrate(self.log_inner_integrand, lo[i], hi[i], self.PIECE_RTOL * 100)
            self.inner_converged &= r.converged
            piece_val[i] = r.value.log_magnitude if r.value.sign else -math.inf
        cum = np.logaddexp.accumulate(np.concatenate([[logs[j]], piece_val]))[1:]
        result = np.empty_like(cum)
        result[order] = cum
        for y, lv in zip(ys_sorted, cum):
            k = bisect.bisect_left(keys, side * y)
            if k < len(keys) and keys[k] == side * y:
                continue
            keys.insert(k, side * float(y))
            logs.insert(k, float(lv))
        return result

    def log_outer_integrand(self, ys) -> np.ndarray:
        ys = np.asarray(ys, dtype=float)
        return self.log_pprime(ys) + self._log_abs_inner(ys)

    def _outer_noise(self, ys) -> np.ndarray:
        # exponent rounding of p'(y) and of the inner integrand at y, plus the inner tolerance
        return (self.log_pprime.noise(ys) + self.log_inner_integrand.noise(ys)
                + 100 * self.PIECE_RTOL)

    def _integrate(self, a: float, b: float) -> QuadratureResult:
        self.inner_converged = True
        r = log_integrate(self._outer, a, b, self.cfg.rel_tol)
        # v >= 0 on both sides of zeta: the inner and outer orientations flip together.
        return QuadratureResult(abs(r.value), r.abs_error_estimate, r.panels,
                                r.converged and self.inner_converged)

    def result(self, x: float) -> QuadratureResult:
        if not -1.0 <= x <= 1.0:
            raise ValueError(f"x must lie in [-1, 1], got {x}")
        return self._integrate(self.cfg.zeta, x)

    def __call__(self, x: float) -> LogValue:
        return self.result(x).value

    def along(self, xs) -> list[QuadratureResult]:
        out: list[QuadratureResult] = []
        prev_x: Optional[float] = None
        for x in map(float, xs):
            if prev_x is not None and _same_side_further(prev_x, x, self.cfg.zeta):
                piece = self._integrate(prev_x, x)
                prev = out[-1]
                out.append(_combine([prev, piece], prev.value + piece.value))
            else:
                out.append(self.result(x))
            prev_x = x
        return out


def scale_function(x: float, cfg: ScaleSpeedConfig) -> LogValue:
    return ScaleFunction(cfg)(x)


def speed_integral(x: float, cfg: ScaleSpeedConfig) -> LogValue:
    return SpeedIntegral(cfg)(x)


@dataclass(frozen=True)
class BoundaryLimit:
    kind: str  # "finite" | "divergent" | "undetermined"
    side: int
    value: Optional[LogValue] = None
    sign: Optional[int] = None
    evidence: tuple = ()
    reason: str = ""

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    def diverges_to(self, sign: int) -> bool:
        return self.kind == "divergent" and self.sign == sign


def _evaluate_sequence(fn, xs):
    along = getattr(fn, "along", None)
    if along is not None:
        return along(xs)
    return [fn(x) for x in xs]


def classify_sequence(xs, values: list[LogValue], cfg: ScaleSpeedConfig, side: int,
                      reason: str = "") -> BoundaryLimit:
    evidence = tuple((float(x), v) for x, v in zip(xs, values))
    if len(values) < 2:
        return BoundaryLimit("undetermined", side, evidence=evidence,
                             reason=reason or "too few samples")
    last, prev = values[-1], values[-2]
    if (last.sign != 0 and last.sign == prev.sign
            and last.log_magnitude > cfg.divergence_log_threshold
            and last.log_magnitude > prev.log_magnitude):
        return BoundaryLimit("divergent", side, sign=last.sign, evidence=evidence,
                             reason="log magnitude above threshold and growing")
    tail = values[-(cfg.cauchy_tail + 1):]
    incs = [b.rel_diff(a) for a, b in zip(tail[:-1], tail[1:])]
    if all(d <= cfg.cauchy_rel_tol for d in incs):
        return BoundaryLimit("finite", side, value=last, evidence=evidence,
                             reason="Cauchy tail")
    # Sustained growth: same sign, increasing magnitudes, non-shrinking absolute steps.
    same_sign = all(v.sign == last.sign != 0 for v in tail)
    growing = all(b.log_magnitude > a.log_magnitude for a, b in zip(tail[:-1], tail[1:]))
    if same_sign and growing:
        steps = [abs(b - a) for a, b in zip(tail[:-1], tail[1:])]
        if all(s2.log_magnitude >= s1.log_magnitude - math.log(2.0) for s1, s2 in zip(steps[:-1], steps[1:])):
            return BoundaryLimit("divergent", side, sign=last.sign, evidence=evidence,
                                 reason="non-Cauchy sustained growth")
    return BoundaryLimit("undetermined", side, evidence=evidence,
                         reason=reason or "neither Cauchy nor divergent at k_max")


def boundary_limit(fn: Callable, side: int, cfg: ScaleSpeedConfig) -> BoundaryLimit:
    """Classify lim fn(x) as x -> side along the geometric boundary sequence."""
    xs = cfg.boundary_sequence(side)
    try:
        raw = _evaluate_sequence(fn, xs)
    except (ArithmeticError, ValueError) as exc:
        log.warning("boundary evaluation failed: %s", exc)
        return BoundaryLimit("undetermined", side, reason=f"evaluation failed: {exc}")
    values, failed_at = [], None
    for x, r in zip(xs, raw):
        if isinstance(r, QuadratureResult):
            if not r.converged and failed_at is None:
                failed_at = x
            r = r.value
        elif not isinstance(r, LogValue):
            r = LogValue.from_float(float(r))
        values.append(r)
    if failed_at is not None:
        return BoundaryLimit("undetermined", side,
                             evidence=tuple((float(x), v) for x, v in zip(xs, values)),
                             reason=f"quadrature did not converge at x={failed_at!r}")
    return classify_sequence(xs, values, cfg, side)


@dataclass(frozen=True)
class FellerVerdict:
    lam: float
    config: ScaleSpeedConfig
    v_limit_left: BoundaryLimit
    v_limit_right: BoundaryLimit
    p_limit_left: BoundaryLimit
    p_limit_right: BoundaryLimit
    condition_met: str  # cond1 | cond2 | cond3 | none | undetermined
    explodes_wp1: Optional[bool]
    notes: tuple = field(default=(ANALYTIC_NOTE, CONVENTION_NOTE))


def decide(v_left: BoundaryLimit, v_right: BoundaryLimit,
           p_left: BoundaryLimit, p_right: BoundaryLimit) -> tuple[str, Optional[bool]]:
    if v_left.is_finite and v_right.is_finite:
        return "cond1", True
    if v_right.is_finite and p_left.diverges_to(-1):
        return "cond2", True
    if v_left.is_finite and p_right.diverges_to(1):
        return "cond3", True
    # A condition stays possible only if none of its parts is settled against it.
    def open_(lim, want):
        return lim.kind == "undetermined" or want(lim)
    fin = lambda lim: lim.is_finite  # noqa: E731
    possible = (
        (open_(v_left, fin) and open_(v_right, fin))
        or (open_(v_right, fin) and open_(p_left, lambda l: l.diverges_to(-1)))
        or (open_(v_left, fin) and open_(p_right, lambda l: l.diverges_to(1)))
    )
    if possible:
        return "undetermined", None
    return "none", False


def feller_test(lam: float, cfg: Optional[ScaleSpeedConfig] = None) -> FellerVerdict:
    cfg = replace(cfg or ScaleSpeedConfig(), lam=float(lam))
    p, v = ScaleFunction(cfg), SpeedIntegral(cfg)
    p_left, p_right = boundary_limit(p, -1, cfg), boundary_limit(p, 1, cfg)
    v_left, v_right = boundary_limit(v, -1, cfg), boundary_limit(v, 1, cfg)
    cond, explodes = decide(v_left, v_right, p_left, p_right)
    log.info("lam=%g zeta=%g %s -> %s", lam, cfg.zeta, cfg.convention, cond)
    return FellerVerdict(float(lam), cfg, v_left, v_right, p_left, p_right, cond, explodes)


@dataclass(frozen=True)
class SweepEntry:
    lam: float
    verdict: Optional[FellerVerdict]
    error: Optional[str] = None


def _sweep_one(args) -> SweepEntry:
    lam, cfg = args
    try:
        return SweepEntry(lam, feller_test(lam, cfg))
    except Exception as exc:  # isolate per-lam failures
        log.exception("sweep entry lam=%g failed", lam)
        return SweepEntry(lam, None, f"{type(exc).__name__}: {exc}")


def lambda_sweep(grid, cfg: Optional[ScaleSpeedConfig] = None, workers: int = 1) -> list[SweepEntry]:
    grid = [float(x) for x in grid]
    if not grid:
        raise ValueError("lambda grid must be non-empty")
    cfg = cfg or ScaleSpeedConfig()
    jobs = [(lam, cfg) for lam in grid]
    if workers <= 1 or len(grid) == 1:
        return [_sweep_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_sweep_one, jobs))
