import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from explosion_lab import feller
from explosion_lab.feller import (
    BoundaryLimit,
    ScaleFunction,
    ScaleSpeedConfig,
    SpeedIntegral,
    classify_sequence,
    decide,
    drift_antiderivative,
    feller_test,
    lambda_sweep,
    log_scale_density,
    scale_function,
    speed_integral,
)
from explosion_lab.model import drift
from explosion_lab.quadrature import LogValue, integrate_exp_poly

# Trapezoid oracles (1e6 points for p, 2000^2 grid for v) at lam = 0, zeta = 0.
P_HALF_LAM0 = 0.6432076185285913
V_HALF_LAM0 = 0.3178264945067033  # grid-limited to ~1e-5 relative

open_unit = st.floats(-0.999, 0.999)


def test_config_validation():
    with pytest.raises(ValueError):
        ScaleSpeedConfig(zeta=1.0)
    with pytest.raises(ValueError):
        ScaleSpeedConfig(convention="other")
    with pytest.raises(ValueError):
        ScaleSpeedConfig(k_max=1)
    seq = ScaleSpeedConfig(k_max=4).boundary_sequence(-1)
    np.testing.assert_array_equal(seq, [-0.5, -0.75, -0.875, -0.9375])


def test_antiderivative_matches_drift():
    xs = np.linspace(-0.95, 0.95, 11)
    h = 1e-6
    for lam in (0.0, 3.0, -40.0):
        fd = (drift_antiderivative(xs + h, lam) - drift_antiderivative(xs - h, lam)) / (2 * h)
        np.testing.assert_allclose(fd, drift(xs, lam), rtol=1e-7, atol=1e-7)
        assert drift_antiderivative(0.0, lam) == 0.0


def test_log_scale_density_examples():
    cfg = ScaleSpeedConfig()
    assert log_scale_density(0.0, cfg) == 0.0
    assert log_scale_density(1.0, cfg) == pytest.approx(1.5)  # lam = 0: -2(3/4 - 3/2)
    cfg = ScaleSpeedConfig(lam=2.0)
    assert log_scale_density(0.5, cfg) == pytest.approx(-2 * (3 / 64 + 1 / 12 - 3 / 8 - 1), rel=1e-14)


@given(st.floats(-0.999, 0.999), open_unit, st.floats(-1e4, 1e4))
def test_convention_duality(x, zeta, lam):
    a = log_scale_density(x, ScaleSpeedConfig(zeta=zeta, lam=lam, convention="paper_expanded"))
    b = log_scale_density(x, ScaleSpeedConfig(zeta=zeta, lam=-lam, convention="definition"))
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12 * (1 + abs(lam)))


@given(st.floats(-0.99, 0.99), open_unit, st.floats(-50, 50))
def test_mirror_symmetry_of_scale_and_speed(x, zeta, lam):
    c = ScaleSpeedConfig(zeta=zeta, lam=lam)
    m = ScaleSpeedConfig(zeta=-zeta, lam=-lam)
    assert log_scale_density(-x, m) == pytest.approx(log_scale_density(x, c), rel=1e-12, abs=1e-12)
    p, pm = scale_function(x, c), scale_function(-x, m)
    assert pm.sign == -p.sign
    if p.sign:
        assert pm.log_magnitude == pytest.approx(p.log_magnitude, rel=1e-8, abs=1e-8)
    v, vm = speed_integral(x, c), speed_integral(-x, m)
    assert vm.sign == v.sign
    if v.sign:
        assert vm.log_magnitude == pytest.approx(v.log_magnitude, rel=1e-8, abs=1e-8)


def test_scale_and_speed_examples():
    cfg = ScaleSpeedConfig()
    assert scale_function(0.0, cfg).sign == 0
    assert speed_integral(0.0, cfg).sign == 0
    assert scale_function(0.5, cfg).to_float() == pytest.approx(P_HALF_LAM0, rel=1e-10)
    assert speed_integral(0.5, cfg).to_float() == pytest.approx(V_HALF_LAM0, rel=1e-4)
    with pytest.raises(ValueError):
        scale_function(1.5, cfg)


def test_speed_integral_against_scipy_dblquad():
    from scipy.integrate import dblquad

    cfg = ScaleSpeedConfig(zeta=0.1, lam=3.0)
    lp = lambda s: float(log_scale_density(s, cfg))  # noqa: E731
    # v(x) = int_zeta^x p'(y) int_zeta^y 2/p'(z) dz dy, for x > zeta
    ref, _ = dblquad(lambda z, y: 2.0 * math.exp(lp(y) - lp(z)), cfg.zeta, 0.8,
                     lambda y: cfg.zeta, lambda y: y, epsabs=0, epsrel=1e-12)
    assert speed_integral(0.8, cfg).to_float() == pytest.approx(ref, rel=1e-9)


@given(st.floats(-0.99, 0.99), st.floats(0.001, 0.5), open_unit, st.floats(-30, 30))
def test_p_strictly_increasing_and_v_nonnegative(x, h, zeta, lam):
    assume(h > 0)
    cfg = ScaleSpeedConfig(zeta=zeta, lam=lam)
    x2 = min(x + h, 1.0)
    p = ScaleFunction(cfg)
    # the increment can be far below the float resolution of p itself, so check it directly
    assert integrate_exp_poly(p.coeffs, x, x2).value.sign == 1
    # pointwise values agree with that ordering up to the quadrature tolerance
    d, scale = p(x2) - p(x), max(abs(p(x)).log_magnitude, abs(p(x2)).log_magnitude)
    assert d.sign >= 0 or d.log_magnitude <= scale + math.log(1e-9)
    assert speed_integral(x, cfg).sign >= 0


def test_along_matches_pointwise():
    cfg = ScaleSpeedConfig(zeta=-0.2, lam=5.0, k_max=12)
    xs = cfg.boundary_sequence(1)
    for fn in (ScaleFunction(cfg), SpeedIntegral(cfg)):
        seq = [r.value for r in fn.along(xs)]
        fresh = type(fn)(cfg)
        for x, v in zip(xs, seq):
            assert v.rel_diff(fresh(x)) < 1e-9


def _seq(values):
    return [LogValue.from_log(v) for v in values]


def test_classify_sequence():
    cfg = ScaleSpeedConfig(k_max=6)
    xs = cfg.boundary_sequence(1)
    fin = classify_sequence(xs, _seq([0.0, 0.5, 0.6, 0.6001, 0.60011, 0.600111]), cfg, 1)
    assert fin.kind == "finite" and fin.is_finite
    div = classify_sequence(xs, _seq([10.0, 200.0, 400.0, 600.0, 800.0, 1000.0]), cfg, 1)
    assert div.kind == "divergent" and div.diverges_to(1)
    slow = classify_sequence(xs, _seq(np.log([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])), cfg, 1)
    assert slow.kind == "divergent"
    wobble = classify_sequence(xs, _seq([0.0, 1.0, 0.0, 1.0, 0.0, 1.0]), cfg, 1)
    assert wobble.kind == "undetermined"


def _lim(kind, sign=None):
    return BoundaryLimit(kind, 1, sign=sign)


F, U = _lim("finite"), _lim("undetermined")
DP, DM = _lim("divergent", 1), _lim("divergent", -1)


@pytest.mark.parametrize("vl,vr,pl,pr,cond,expl", [
    (F, F, DM, DP, "cond1", True),
    (DP, F, DM, DP, "cond2", True),
    (F, DP, DM, DP, "cond3", True),
    (DP, DP, DM, DP, "none", False),
    (U, DP, DM, DP, "undetermined", None),
    (DP, F, F, F, "none", False),
])
def test_decide(vl, vr, pl, pr, cond, expl):
    assert decide(vl, vr, pl, pr) == (cond, expl)


@pytest.mark.parametrize("lam,cond", [(0.0, "cond1"), (5.0, "cond1"), (-5.0, "cond1")])
def test_feller_small_lambda(lam, cond):
    v = feller_test(lam)
    assert v.condition_met == cond and v.explodes_wp1 is True
    assert v.p_limit_left.is_finite and v.p_limit_right.is_finite


@pytest.mark.parametrize("convention,cond", [("definition", "cond3"), ("paper_expanded", "cond2")])
def test_feller_large_lambda_conventions(convention, cond):
    v = feller_test(1e3, ScaleSpeedConfig(convention=convention))
    assert v.condition_met == cond and v.explodes_wp1
    p = v.p_limit_right if convention == "definition" else v.p_limit_left
    assert p.kind == "divergent"
    assert p.evidence[-1][1].log10_magnitude > 217


@pytest.mark.parametrize("lam", [10.0, 100.0, 1e3])
def test_verdict_stable_in_k_max(lam):
    out = {k: feller_test(lam, ScaleSpeedConfig(k_max=k)) for k in (20, 30, 40)}
    assert len({(v.condition_met, v.explodes_wp1) for v in out.values()}) == 1


def test_verdict_zeta_independent():
    res = {feller_test(50.0, ScaleSpeedConfig(zeta=z)).explodes_wp1 for z in (-0.5, 0.0, 0.5)}
    assert res == {True}


def test_sweep_empty_grid():
    with pytest.raises(ValueError):
        lambda_sweep([])


def test_sweep_isolates_failures(monkeypatch):
    real = feller.feller_test

    def flaky(lam, cfg=None):
        if lam == 2.0:
            raise ArithmeticError("boom")
        return real(lam, cfg)

    monkeypatch.setattr(feller, "feller_test", flaky)
    out = lambda_sweep([1.0, 2.0, 3.0])
    assert [e.lam for e in out] == [1.0, 2.0, 3.0]
    assert out[1].verdict is None and "boom" in out[1].error
    assert out[0].verdict.explodes_wp1 and out[2].verdict.explodes_wp1


def test_sweep_parallel_matches_serial():
    grid = [0.0, 10.0, 100.0]
    cfg = ScaleSpeedConfig(k_max=20)
    a = lambda_sweep(grid, cfg, workers=1)
    b = lambda_sweep(grid, cfg, workers=3)
    assert [e.verdict for e in a] == [e.verdict for e in b]


def test_undetermined_on_non_convergence():
    cfg = replace(ScaleSpeedConfig(lam=5.0, k_max=6), rel_tol=1e-14)

    class Broken:
        def along(self, xs):
            raise ArithmeticError("no")

    assert feller.boundary_limit(Broken(), 1, cfg).kind == "undetermined"


@pytest.mark.parametrize("convention,cond", [("definition", "cond3"), ("paper_expanded", "cond2")])
def test_feller_top_of_sweep_range(convention, cond):
    v = feller_test(1e6, ScaleSpeedConfig(convention=convention))
    assert v.condition_met == cond and v.explodes_wp1 is True
