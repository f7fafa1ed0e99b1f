import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from interptrace.errors import (DivergenceError, DomainError, InsufficientDataError,
                                MonotonicityError)
from interptrace.scaling import (GridSpec, ScalingFunction, check_integral_majorant,
                                 dilation_report, eval_dilation_supremum, fit_membership,
                                 power, transform)


def brute_force_supremum(f, lam, n=100_000):
    t = np.geomspace(1e-8, 1e8, n)
    return float(np.max(f(lam * t) / f(t)))


def test_supremum_of_square_root_at_four():
    assert eval_dilation_supremum(power(0.5), 4.0) == pytest.approx(2.0, rel=1e-12)


def test_supremum_at_one_is_one():
    assert eval_dilation_supremum(power(1.0), 1.0) == 1.0


def test_supremum_of_kinked_function_matches_brute_force():
    f = lambda t: np.sqrt(t) * (1.0 + np.minimum(t, 1.0))
    phi = ScalingFunction(f, None, GridSpec(), None)
    got = float(eval_dilation_supremum(phi, 2.0))
    assert math.sqrt(2.0) <= got <= 2.0 * math.sqrt(2.0)
    assert got == pytest.approx(brute_force_supremum(f, 2.0), rel=1e-3)


def test_nonfinite_values_name_the_point():
    phi = ScalingFunction(lambda t: np.where(t > 1e3, np.nan, t), None, GridSpec(), None)
    with pytest.raises(Exception, match="t="):
        eval_dilation_supremum(phi, 2.0)


@given(theta=st.floats(-2.0, 2.0), k=st.floats(-10.0, 10.0))
def test_power_supremum_is_exact(theta, k):
    lam = 2.0 ** k
    assert eval_dilation_supremum(power(theta), lam) == pytest.approx(lam ** theta, rel=1e-10)


def test_membership_of_pure_power():
    fit = fit_membership(power(0.3, (0.0, 1.0)))
    assert fit.a_hat == pytest.approx(0.3, abs=1e-9)
    assert fit.b_hat == pytest.approx(0.3, abs=1e-9)
    assert fit.member


def test_membership_of_caputo_scaling():
    phi = ScalingFunction.from_json({"kind": "caputo", "alpha": 0.5, "bounds": [-1, 0]})
    fit = fit_membership(phi)
    assert fit.a_hat == pytest.approx(-0.5, abs=1e-9)
    assert fit.b_hat == pytest.approx(-0.5, abs=1e-9)
    assert fit.member


def test_boundary_exponent_is_not_a_member():
    fit = fit_membership(power(1.0, (0.0, 1.0)))
    assert fit.eps_hat == pytest.approx(0.0, abs=1e-12)
    assert not fit.member


def test_too_few_samples():
    with pytest.raises(InsufficientDataError):
        dilation_report(power(0.5), K=0)


def test_report_is_one_at_unit_dilation_and_submultiplicative():
    phi = ScalingFunction(lambda t: np.sqrt(t) * (1.0 + np.minimum(t, 1.0)), None,
                          GridSpec(1e-6, 1e6, 32), None)
    rep = dilation_report(phi, K=6)
    s = dict(zip(np.log2(rep.lambdas).round().astype(int), rep.s_hat))
    assert s[0] == 1.0
    for i in range(-6, 7):
        for j in range(-6, 7):
            if -6 <= i + j <= 6:
                assert s[i + j] <= s[i] * s[j] * (1.0 + 1e-6)


def test_power_weight_transform_moves_bounds():
    psi = transform(power(0.5, (0.5, 0.5)), "power_weight", alpha=1.0)
    t = np.array([0.1, 2.0, 30.0])
    assert np.allclose(psi(t), t ** 1.5)
    assert psi.class_bounds == (1.5, 1.5)


def test_inverse_of_square():
    inv = transform(power(2.0, (2.0, 2.0)), "inverse")
    x = np.geomspace(1e-3, 1e3, 13)
    assert np.allclose(inv(x), np.sqrt(x), rtol=1e-10)
    assert inv.class_bounds == (0.5, 0.5)


def test_inverse_errors():
    bump = ScalingFunction(lambda t: t / (1.0 + t * t), None, GridSpec(1e-2, 1e2, 16), None)
    with pytest.raises(MonotonicityError):
        transform(bump, "inverse")
    sq = ScalingFunction(lambda t: np.minimum(t, 1.0) + 0 * t + t * 1e-3, None,
                         GridSpec(1e-2, 1e2, 16), None)
    inv = transform(sq, "inverse")
    with pytest.raises(DomainError):
        inv(-1.0)


def test_stability_with_zero_theta0_keeps_phi():
    psi = transform(power(1 / 3, (1 / 3, 1 / 3)), "stability", theta0=0.0, theta1=1.0)
    s = np.geomspace(1e-4, 1e4, 9)
    assert np.allclose(psi(s), np.cbrt(s), rtol=1e-14)


@given(theta=st.floats(0.05, 0.45))
def test_argument_power_doubles_fitted_exponents(theta):
    phi = power(theta, (0.0, 1.0))
    base = fit_membership(phi)
    moved = transform(phi, "argument_power", alpha=2.0)
    fit = fit_membership(moved)
    assert moved.class_bounds == (0.0, 2.0)
    assert fit.a_hat == pytest.approx(2 * base.a_hat, abs=1e-3)
    assert fit.b_hat == pytest.approx(2 * base.b_hat, abs=1e-3)


@given(theta=st.floats(-1.5, 1.5))
def test_reflect_is_an_involution(theta):
    phi = ScalingFunction(lambda t: t ** theta * (1.0 + np.minimum(t, 1.0)), None,
                          GridSpec(1e-4, 1e4, 16), None)
    twice = transform(transform(phi, "reflect"), "reflect")
    t = np.geomspace(1e-4, 1e4, 33)
    assert np.allclose(twice(t), phi(t), rtol=1e-12)


def test_upper_majorant_closed_form():
    rep = check_integral_majorant(power(0.5, (0.0, 1.0)), 1.0, "upper", [1.0])
    assert rep.ratio_max == pytest.approx(4.0, rel=1e-8)
    assert rep.passed


def test_lower_majorant_by_symmetry():
    rep = check_integral_majorant(power(-0.5, (-1.0, 0.0)), 1.0, "lower", [1.0])
    assert rep.ratio_max == pytest.approx(4.0, rel=1e-8)


def test_boundary_majorant_diverges():
    with pytest.raises(DivergenceError):
        check_integral_majorant(power(1.0), 1.0, "upper", [1.0])


@given(c=st.floats(1e-3, 1e3))
def test_majorant_ratio_is_scale_invariant(c):
    phi = power(0.3, (0.0, 1.0))
    x = [0.5, 1.0, 7.0]
    a = check_integral_majorant(phi, 1.0, "upper", x).ratio_max
    b = check_integral_majorant(phi.scaled(c), 1.0, "upper", x).ratio_max
    assert b == pytest.approx(a, rel=1e-6)


@pytest.mark.parametrize("desc", [
    {"kind": "power", "theta": 0.25},
    {"kind": "caputo", "alpha": 0.4},
    {"kind": "table", "t": [0.1, 1.0, 10.0], "values": [0.5, 1.0, 3.0]},
    {"kind": "expr", "expr": "sqrt(t) + t"},
])
def test_json_round_trip(desc):
    phi = ScalingFunction.from_json(desc)
    again = ScalingFunction.from_json(phi.to_json())
    t = np.geomspace(0.01, 100, 9)
    assert np.array_equal(phi(t), again(t))
