"""Lipschitz constants of the Y drift and the X-equation right-hand side."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import DomainError, drift, x_rhs

# Samples closer than this to |X| = 1 are reported as lying in the singular band.
SINGULAR_BAND = 1e-12


class SingularityError(DomainError):
    """f'(X) evaluated at a point where it is not finite."""


def drift_derivative(Y, lam):
    """b'(Y) = 9Y^2 + 2 lam Y - 3."""
    return 9.0 * Y * Y + 2.0 * lam * Y - 3.0


def drift_derivative_sup(a: float, b: float, lam: float) -> tuple[float, float]:
    """max |b'| on [a, b] and the point attaining it.

    b' is a convex parabola, so the max of |b'| sits at an endpoint or at the
    vertex -lam/9.
    """
    cands = [a, b]
    vertex = -lam / 9.0
    if a < vertex < b:
        cands.append(vertex)
    vals = [abs(drift_derivative(c, lam)) for c in cands]
    i = int(np.argmax(vals))
    return vals[i], cands[i]


@dataclass(frozen=True)
class LipschitzReport:
    interval: tuple
    lam: float
    analytic_constant: float
    argmax: float
    sampled_constant: float
    witness: tuple


def local_lipschitz_constant(a: float, b: float, lam: float, n_pairs: int = 10_000,
                             seed: int = 0) -> LipschitzReport:
    if a > b:
        raise DomainError(f"empty interval [{a}, {b}]")
    if a == b:
        return LipschitzReport((a, b), lam, 0.0, a, 0.0, (a, a))
    sup, argmax = drift_derivative_sup(a, b, lam)
    rng = np.random.default_rng(seed)
    x = rng.uniform(a, b, n_pairs)
    y = rng.uniform(a, b, n_pairs)
    keep = x != y
    x, y = x[keep], y[keep]
    q = np.abs(drift(x, lam) - drift(y, lam)) / np.abs(x - y)
    i = int(np.argmax(q))
    return LipschitzReport((a, b), lam, float(sup), float(argmax), float(q[i]),
                           (float(x[i]), float(y[i])))


def _exact_drift(x: Fraction, lam: Fraction) -> Fraction:
    return (x * x - 1) * (3 * x + lam)


def global_lipschitz_falsify(lam: float, K: float) -> tuple[float, float]:
    """Return (x, y) with |b(x) - b(y)| > K |x - y|.

    With y = x + 1 the quotient is 9x^2 + 9x + lam(2x + 1), which exceeds K once
    x >= max(sqrt(K), |lam| + 1).  The inequality is re-checked in exact rational
    arithmetic before returning.
    """
    if not K > 0:
        raise ValueError("K must be > 0")
    x = float(math.ceil(max(math.sqrt(K), abs(lam) + 1.0, 1.0)))
    while True:
        y = x + 1.0
        fx, fy, fl = Fraction(x), Fraction(y), Fraction(lam)
        if abs(_exact_drift(fy, fl) - _exact_drift(fx, fl)) > Fraction(K) * abs(fy - fx):
            return x, y
        x *= 2.0  # unreachable for the construction above; kept as a guard


def x_rhs_derivative(X, lam):
    """f'(X) = X^2 (-9 - lam / sqrt(1 - X^2)) + lam sqrt(1 - X^2) + 3, singular at |X| = 1."""
    if np.any(np.abs(X) >= 1.0):
        raise SingularityError(f"f'(X) is singular for |X| >= 1, got {X}")
    r = np.sqrt(1.0 - X * X)
    return X * X * (-9.0 - lam / r) + lam * r + 3.0


@dataclass(frozen=True)
class XExistenceReport:
    lam: float
    f_continuous_on_closed_interval: bool
    subinterval: tuple
    sup_abs_fprime: float
    boundary_k: tuple
    boundary_abs_fprime: tuple
    fprime_unbounded: bool
    notes: tuple


def x_existence_report(lam: float, subinterval=(-0.9, 0.9), k_max: int = 40,
                       n_samples: int = 20_001) -> XExistenceReport:
    """Summarize why uniqueness for X' = f(X) is only guaranteed inside (-1, 1)."""
    a, b = subinterval
    if not -1.0 < a <= b < 1.0:
        raise ValueError("subinterval must be a closed subset of (-1, 1)")
    grid = np.linspace(a, b, n_samples)
    sup = float(np.max(np.abs(x_rhs_derivative(grid, lam))))
    # f is continuous on [-1, 1]: check it is finite there, including the endpoints.
    f_ok = bool(np.all(np.isfinite(x_rhs(np.linspace(-1.0, 1.0, 2001), lam))))
    ks = np.arange(1, k_max + 1)
    xk = 1.0 - 2.0**-ks.astype(float)
    vals = np.abs(x_rhs_derivative(xk, lam))
    tail = vals[len(vals) // 2:]
    unbounded = bool(lam != 0 and np.all(np.diff(tail) > 0) and tail[-1] > 1e3 * sup)
    notes = []
    if lam == 0:
        notes.append("lam = 0: f'(X) = 3 - 9X^2 stays bounded at X = +-1, so the "
                     "endpoint singularity is absent in this case.")
    else:
        notes.append("|f'(X)| grows like |lam| / sqrt(1 - X^2) as |X| -> 1.")
    if np.any(1.0 - xk < SINGULAR_BAND):
        notes.append(f"samples within {SINGULAR_BAND:g} of |X| = 1 lie in the singular band.")
    return XExistenceReport(
        lam=lam,
        f_continuous_on_closed_interval=f_ok,
        subinterval=(a, b),
        sup_abs_fprime=sup,
        boundary_k=tuple(int(k) for k in ks),
        boundary_abs_fprime=tuple(float(v) for v in vals),
        fprime_unbounded=unbounded,
        notes=tuple(notes),
    )
