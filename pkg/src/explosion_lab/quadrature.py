"""Adaptive Gauss-Kronrod quadrature carried out entirely in the log domain.

Integrands are supplied through their natural log, so values such as exp(10^4)
never materialize as floats.  Each panel is scaled by its own maximum before
exponentiation and panel sums are combined with log-sum-exp.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

LOG_FLOAT_MAX = math.log(np.finfo(float).max)
LN10 = math.log(10.0)
RULE = "G7K15"
MAX_POLY_DEGREE = 8

# Kronrod 15-point abscissae on [-1, 1] (positive half, descending) and weights.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
# 7-point Gauss weights for the odd-indexed Kronrod nodes.
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]
_EPS = np.finfo(float).eps


class QuadratureError(ArithmeticError):
    """The integrand produced NaN or +inf in the log domain."""


@dataclass(frozen=True)
class LogValue:
    """Signed real stored as sign * exp(log_magnitude)."""

    sign: int
    log_magnitude: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign}")
        if self.sign != 0 and math.isnan(self.log_magnitude):
            raise ValueError("log_magnitude is NaN")
        if self.sign != 0 and self.log_magnitude == -math.inf:
            object.__setattr__(self, "sign", 0)

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(0, -math.inf)

    @classmethod
    def from_float(cls, x: float) -> "LogValue":
        if math.isnan(x) or math.isinf(x):
            raise ValueError(f"cannot represent {x}")
        if x == 0:
            return cls.zero()
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def from_log(cls, log_magnitude: float, sign: int = 1) -> "LogValue":
        if log_magnitude == -math.inf:
            return cls.zero()
        return cls(sign, float(log_magnitude))

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    @property
    def log10_magnitude(self) -> float:
        return self.log_magnitude / LN10 if self.sign else -math.inf

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.log_magnitude > LOG_FLOAT_MAX:
            raise OverflowError(f"exp({self.log_magnitude:g}) exceeds the float range")
        return self.sign * math.exp(self.log_magnitude)

    def __neg__(self) -> "LogValue":
        return LogValue(-self.sign, self.log_magnitude)

    def __abs__(self) -> "LogValue":
        return LogValue(abs(self.sign), self.log_magnitude)

    def __mul__(self, other: "LogValue") -> "LogValue":
        if self.sign == 0 or other.sign == 0:
            return LogValue.zero()
        return LogValue(self.sign * other.sign, self.log_magnitude + other.log_magnitude)

    def __truediv__(self, other: "LogValue") -> "LogValue":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogValue")
        if self.sign == 0:
            return LogValue.zero()
        return LogValue(self.sign * other.sign, self.log_magnitude - other.log_magnitude)

    def __add__(self, other: "LogValue") -> "LogValue":
        if other.sign == 0:
            return self
        if self.sign == 0:
            return other
        hi, lo = (self, other) if self.log_magnitude >= other.log_magnitude else (other, self)
        d = lo.log_magnitude - hi.log_magnitude
        if hi.sign == lo.sign:
            return LogValue(hi.sign, hi.log_magnitude + math.log1p(math.exp(d)))
        if d == 0.0:
            return LogValue.zero()
        return LogValue(hi.sign, hi.log_magnitude + math.log1p(-math.exp(d)))

    def __sub__(self, other: "LogValue") -> "LogValue":
        return self + (-other)

    def rel_diff(self, other: "LogValue") -> float:
        """|self - other| / max(|self|, |other|), computed without leaving the log domain."""
        if self.sign == 0 and other.sign == 0:
            return 0.0
        diff = self - other
        if diff.sign == 0:
            return 0.0
        scale = max(self.log_magnitude if self.sign else -math.inf,
                    other.log_magnitude if other.sign else -math.inf)
        return math.exp(diff.log_magnitude - scale)


@dataclass(frozen=True)
class QuadratureResult:
    value: LogValue
    abs_error_estimate: LogValue
    panels: int
    converged: bool
    rule: str = RULE


def gk15_panels(log_f: Callable[[np.ndarray], np.ndarray], lo, hi, split: bool = False):
    """Apply the G7K15 pair to each panel [lo_i, hi_i].

    Returns (log_value, log_error) arrays; error is |K15 - G7| with a round-off floor.
    The floor also covers rounding in the exponent itself: an absolute error d in
    log f is a relative error of about d in f, which for exponents of size 1e6
    is far above machine epsilon.  If log_f has a ``noise`` method it supplies d
    at each node; otherwise eps * (1 + |log f|) is assumed.

    With split=True, returns (log_value, log_reducible, log_floor) instead: the
    reducible part is |K15 - G7| when it exceeds the floor and zero otherwise.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * NODES[None, :]
    L = np.asarray(log_f(x.ravel()), dtype=float).reshape(x.shape)
    if np.isnan(L).any():
        raise QuadratureError("integrand returned NaN")
    if (L == np.inf).any():
        raise QuadratureError("integrand returned +inf in the log domain")
    noise = getattr(log_f, "noise", None)
    if noise is not None:
        d = np.asarray(noise(x.ravel()), dtype=float).reshape(x.shape)
    else:
        d = _EPS * (1.0 + np.abs(L))
    d = np.where(np.isfinite(L), d, 0.0)
    rel_floor = np.maximum(50.0 * _EPS, 2.0 * d.max(axis=1))
    m = L.max(axis=1)
    dead = m == -np.inf
    m_safe = np.where(dead, 0.0, m)
    e = np.exp(L - m_safe[:, None])
    k = e @ KRONROD_WEIGHTS
    g = e @ GAUSS_WEIGHTS
    with np.errstate(divide="ignore"):
        log_half = np.log(half)
        log_val = m_safe + log_half + np.log(k)
        diff, floor = np.abs(k - g), rel_floor * k
        base = m_safe + log_half
        log_err = base + np.log(np.maximum(diff, floor))
        log_red = np.where(diff > floor, base + np.log(diff), -np.inf)
        log_floor = base + np.log(floor)
    for arr in (log_val, log_err, log_red, log_floor):
        arr[dead | (half == 0)] = -np.inf
    if split:
        return log_val, log_red, log_floor
    return log_val, log_err


def _logsumexp(a) -> float:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return -math.inf
    m = a.max()
    if m == -np.inf:
        return -math.inf
    return float(m + math.log(np.exp(a - m).sum()))


def log_integrate(log_f, a: float, b: float, rel_tol: float = 1e-8,
                  max_panels: int = 10**6) -> QuadratureResult:
    """Integrate exp(log_f(s)) from a to b.

    log_f must accept a 1-D array and return log-integrand values (-inf for zeros).
    The worst panel is bisected until the summed error estimate drops below
    rel_tol times the running total.  Error below a panel's round-off floor cannot
    be reduced by bisection, so it is reported but does not block convergence.
    If max_panels is reached the best estimate is returned with converged=False.
    """
    if not rel_tol > 0:
        raise ValueError("rel_tol must be > 0")
    sign = 1
    if b < a:
        a, b, sign = b, a, -1
    if a == b:
        return QuadratureResult(LogValue.zero(), LogValue.zero(), 0, True)

    lo, hi = [a], [b]
    v0, e0, f0 = gk15_panels(log_f, lo, hi, split=True)
    vals, errs, floors = [float(v0[0])], [float(e0[0])], [float(f0[0])]
    heap = [(-errs[0], 0)]
    ref = vals[0] if vals[0] > -math.inf else 0.0
    total = math.exp(vals[0] - ref)
    err_total = math.exp(errs[0] - ref)
    log_rel = math.log(rel_tol)

    def running_done() -> bool:
        if err_total == 0.0:
            return True
        return math.log(err_total) <= log_rel + (math.log(total) if total > 0 else -math.inf)

    def resync() -> None:
        nonlocal total, err_total, ref
        ref = max(vals)
        if ref == -math.inf:
            ref = 0.0
        total = float(np.exp(np.asarray(vals) - ref).sum())
        err_total = float(np.exp(np.asarray(errs) - ref).sum())

    it = 0
    while True:
        # Running sums drift through cancellation; confirm exactly before stopping.
        if running_done() or it % 256 == 255:
            resync()
            if running_done():
                break
        if len(vals) >= max_panels or not heap:
            break
        it += 1
        _, i = heapq.heappop(heap)
        mid = 0.5 * (lo[i] + hi[i])
        if not lo[i] < mid < hi[i]:
            # Panel at float resolution: its error cannot be reduced further.
            floors[i] = float(np.logaddexp(floors[i], errs[i]))
            errs[i] = -math.inf
            resync()
            continue
        nv, ne, nf = gk15_panels(log_f, [lo[i], mid], [mid, hi[i]], split=True)
        new_ref = max(ref, float(nv.max()))
        if new_ref > ref + 300.0:
            scale = math.exp(ref - new_ref)
            total *= scale
            err_total *= scale
            ref = new_ref
        total += math.exp(nv[0] - ref) + math.exp(nv[1] - ref) - math.exp(vals[i] - ref)
        err_total += math.exp(ne[0] - ref) + math.exp(ne[1] - ref) - math.exp(errs[i] - ref)
        total = max(total, 0.0)
        err_total = max(err_total, 0.0)
        old_hi = hi[i]
        hi[i], vals[i], errs[i], floors[i] = mid, float(nv[0]), float(ne[0]), float(nf[0])
        lo.append(mid)
        hi.append(old_hi)
        vals.append(float(nv[1]))
        errs.append(float(ne[1]))
        floors.append(float(nf[1]))
        for j in (i, len(vals) - 1):
            if errs[j] > -math.inf:
                heapq.heappush(heap, (-errs[j], j))

    # Final reduction in a fixed (left-to-right) order so results are reproducible.
    order = np.argsort(np.asarray(lo), kind="stable")
    log_value = _logsumexp(np.asarray(vals)[order])
    log_red = _logsumexp(np.asarray(errs)[order])
    log_err = _logsumexp(np.concatenate([np.asarray(errs)[order], np.asarray(floors)[order]]))
    converged = log_red == -math.inf or log_red <= log_rel + log_value
    return QuadratureResult(
        value=LogValue.from_log(log_value, sign),
        abs_error_estimate=LogValue.from_log(log_err),
        panels=len(vals),
        converged=bool(converged),
    )


class PolyLogIntegrand:
    """Vectorized evaluator of a polynomial with ascending coefficients."""

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        if c.size - 1 > MAX_POLY_DEGREE:
            raise ValueError(f"polynomial degree must be <= {MAX_POLY_DEGREE}")
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        self.coeffs = c
        self._abs = np.abs(c)

    def __call__(self, s):
        return np.polynomial.polynomial.polyval(s, self.coeffs)

    def noise(self, s):
        """Rounding bound for Horner evaluation: ~2 deg eps sum |c_i| |s|^i."""
        deg = max(self.coeffs.size - 1, 1)
        return 2.0 * deg * _EPS * np.polynomial.polynomial.polyval(np.abs(s), self._abs)


def poly_log_integrand(coeffs) -> PolyLogIntegrand:
    return PolyLogIntegrand(coeffs)


def integrate_exp_poly(coeffs, a: float, b: float, rel_tol: float = 1e-8,
                       max_panels: int = 10**6) -> QuadratureResult:
    """Integral of exp(c0 + c1 s + c2 s^2 + ...) over [a, b]."""
    return log_integrate(poly_log_integrand(coeffs), a, b, rel_tol, max_panels)
