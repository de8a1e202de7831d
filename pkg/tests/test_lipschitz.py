from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from explosion_lab.lipschitz import (
    SingularityError,
    drift_derivative,
    drift_derivative_sup,
    global_lipschitz_falsify,
    local_lipschitz_constant,
    x_existence_report,
    x_rhs_derivative,
)
from explosion_lab.model import DomainError, drift, x_rhs

lams = st.floats(-1e3, 1e3)


def test_examples():
    assert local_lipschitz_constant(-1, 1, 0.0).analytic_constant == 6.0
    assert local_lipschitz_constant(-1, 1, 9.0).analytic_constant == 24.0
    r = local_lipschitz_constant(0.3, 0.3, 5.0)
    assert r.analytic_constant == 0.0 and r.sampled_constant == 0.0
    with pytest.raises(DomainError):
        local_lipschitz_constant(1.0, -1.0, 0.0)


def test_derivative_matches_finite_difference():
    y = np.linspace(-2, 2, 41)
    h = 1e-6
    for lam in (-7.0, 0.0, 3.5):
        fd = (drift(y + h, lam) - drift(y - h, lam)) / (2 * h)
        np.testing.assert_allclose(drift_derivative(y, lam), fd, rtol=1e-6, atol=1e-6)


@given(lams, st.floats(-5, 5), st.floats(0, 5))
def test_sup_against_dense_grid(lam, a, w):
    b = a + w
    sup, arg = drift_derivative_sup(a, b, lam)
    grid = np.linspace(a, b, 4001)
    dense = np.max(np.abs(drift_derivative(grid, lam)))
    assert sup >= dense * (1 - 1e-12)
    assert a <= arg <= b
    assert abs(drift_derivative(arg, lam)) == sup


@given(lams, st.floats(-3, 3), st.floats(0.01, 3), st.integers(0, 1000))
def test_mean_value_bound(lam, a, w, seed):
    r = local_lipschitz_constant(a, a + w, lam, n_pairs=2000, seed=seed)
    assert r.sampled_constant <= r.analytic_constant * (1 + 1e-9) + 1e-9


@given(lams, st.floats(-3, 3), st.floats(0.01, 3), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_nested_interval_monotone(lam, a, w, s, t):
    inner_a = a + s * w / 2
    inner_b = a + w - t * w / 2
    outer = drift_derivative_sup(a, a + w, lam)[0]
    inner = drift_derivative_sup(inner_a, inner_b, lam)[0]
    assert inner <= outer


@given(lams, st.floats(1.0, 1e12))
def test_falsify_witness(lam, K):
    x, y = global_lipschitz_falsify(lam, K)
    fx, fy, fl = Fraction(x), Fraction(y), Fraction(lam)
    b = lambda z: (z * z - 1) * (3 * z + fl)  # noqa: E731
    assert abs(b(fy) - b(fx)) > Fraction(K) * abs(fy - fx)


def test_falsify_rejects_nonpositive_K():
    with pytest.raises(ValueError):
        global_lipschitz_falsify(1.0, 0.0)


def test_x_rhs_derivative():
    assert x_rhs_derivative(0.0, 2.0) == pytest.approx(5.0)
    X, h = 0.4, 1e-6
    fd = (x_rhs(X + h, 2.0) - x_rhs(X - h, 2.0)) / (2 * h)
    assert x_rhs_derivative(X, 2.0) == pytest.approx(fd, rel=1e-8)
    for bad in (1.0, -1.0, 1.5, np.array([0.0, 1.0])):
        with pytest.raises(SingularityError):
            x_rhs_derivative(bad, 2.0)
    assert np.isfinite(x_rhs_derivative(1 - 1e-15, 2.0))


def test_x_existence_report():
    r = x_existence_report(1.0)
    assert r.f_continuous_on_closed_interval
    assert np.isfinite(r.sup_abs_fprime)
    assert r.fprime_unbounded
    assert r.boundary_abs_fprime[-1] > 1e5
    r0 = x_existence_report(0.0)
    assert not r0.fprime_unbounded and "lam = 0" in r0.notes[0]
    with pytest.raises(ValueError):
        x_existence_report(1.0, subinterval=(-1.0, 0.5))
