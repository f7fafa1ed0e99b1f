import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erf, erfcx

from interptrace.errors import BudgetError, ParameterError
from interptrace.kernel import caputo, sum_of_powers
from interptrace.subordinator import (check_flat_increments, check_theta_properties,
                                      compound_poisson, cutoff_for_intensity,
                                      cutoff_richardson, exact_stable, first_passage_times,
                                      laplace_check, sample, sample_path_general,
                                      sample_stable_increment, survival_closed_form,
                                      survival_probability, theta, theta_closed_form,
                                      varkappa, varkappa_and_sonine_check)


def mp_theta(t, lam):
    return float(mpmath.e ** (lam * lam * t) * mpmath.erfc(lam * mpmath.sqrt(t)))


@pytest.mark.parametrize("r", [1.0, 2.0])
def test_stable_laplace_identity(r):
    s = sample_stable_increment(0.5, r, 100_000, seed=3)
    x = np.exp(-s)
    hw = 1.96 * x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - math.exp(-r)) <= 3 * hw


def test_stable_distribution_function():
    s = sample_stable_increment(0.5, 2.0, 100_000, seed=5)
    p = np.mean(s <= 4.0)
    hw = 1.96 * math.sqrt(p * (1 - p) / s.size)
    assert abs(p - math.erfc(0.5)) <= 3 * hw


def test_stable_rejects_bad_index():
    with pytest.raises(ParameterError):
        sample_stable_increment(1.0, 1.0, 10)


def test_small_time_samples_vanish():
    s = sample_stable_increment(0.7, 1e-12, 10_000, seed=1)
    assert np.mean(s > 1e-6) < 1e-3


def test_compound_poisson_laplace_within_one_percent():
    k = caputo(0.5)
    m = compound_poisson(k, 1e-4, seed=2)
    s = sample_path_general(m, 1.0, 100_000)
    assert np.exp(-s).mean() == pytest.approx(math.exp(-1.0), rel=0.01)


@pytest.mark.parametrize("delta", [1e-2, 1e-4])
def test_jump_intensity_is_kernel_at_cutoff(delta):
    m = compound_poisson(caputo(0.5), delta)
    assert m.intensity == pytest.approx(delta ** -0.5 / math.gamma(0.5), rel=1e-12)


def test_compound_poisson_at_zero_time():
    m = compound_poisson(caputo(0.5), 1e-3)
    assert np.all(sample_path_general(m, 0.0, 500) == 0.0)


def test_cutoff_for_intensity_inverts_kernel():
    k = caputo(0.4)
    d = cutoff_for_intensity(k, 250.0)
    assert float(k(d)) == pytest.approx(250.0, rel=1e-10)


@pytest.mark.parametrize("model", [
    exact_stable(0.3, seed=7), exact_stable(0.8, seed=8),
    compound_poisson(sum_of_powers([(1, 0.3), (1, 0.6)]), 1e-4, seed=9),
], ids=["stable0.3", "stable0.8", "cp-mixture"])
@pytest.mark.parametrize("r, lam", [(0.5, 1.0), (1.0, 3.0)])
def test_laplace_identity_for_models(model, r, lam):
    est, exact = laplace_check(model, r, lam, n=100_000)
    assert est.contains(exact, 3.0)


def test_survival_closed_form_values():
    assert float(survival_closed_form(1.0, 1.0)) == pytest.approx(erf(0.5), rel=1e-14)
    assert float(survival_closed_form(2.0, 1.0)) == pytest.approx(erf(1.0), rel=1e-14)


@pytest.mark.parametrize("r, t", [(1.0, 1.0), (2.0, 1.0)])
def test_survival_estimate_matches_erf(r, t):
    est = survival_probability(exact_stable(0.5, seed=11), r, t, n=100_000)
    assert est.contains(erf(r / (2 * math.sqrt(t))), 3.0)


def test_survival_budget():
    with pytest.raises(BudgetError):
        survival_probability(exact_stable(0.5), 1.0, 1.0, n=10)


def test_survival_monotone_in_t_and_r():
    m = exact_stable(0.5, seed=4)
    ts = [0.1, 1.0, 10.0]
    p = [survival_probability(m, 1.0, t, n=20_000) for t in ts]
    for a, b in zip(p, p[1:]):
        assert b.value <= a.value + a.half_width_95 + b.half_width_95
    q = [survival_probability(m, r, 1.0, n=20_000) for r in (0.5, 1.0, 2.0)]
    for a, b in zip(q, q[1:]):
        assert b.value >= a.value - a.half_width_95 - b.half_width_95


def test_survival_vanishes_for_large_t():
    assert survival_probability(exact_stable(0.5, seed=2), 1.0, 1e12, n=1000).value < 0.01


def test_theta_at_zero_is_one():
    m = exact_stable(0.5)
    for lam in (0.1, 1.0, 10.0):
        assert theta(m, 0.0, lam, n=1000).value == 1.0
        assert float(theta_closed_form(0.0, lam)) == 1.0


@pytest.mark.parametrize("t, lam", [(1.0, 1.0), (1.0, 10.0), (0.1, 3.0), (5.0, 0.2)])
def test_theta_closed_form_against_mpmath(t, lam):
    assert float(theta_closed_form(t, lam)) == pytest.approx(mp_theta(t, lam), rel=1e-12)


def test_theta_reference_values():
    assert float(theta_closed_form(1.0, 1.0)) == pytest.approx(math.e * math.erfc(1.0), rel=1e-12)
    assert float(theta_closed_form(1.0, 10.0)) == pytest.approx(0.05614, abs=5e-5)


@pytest.mark.parametrize("t, lam", [(1.0, 1.0), (1.0, 10.0)])
def test_theta_estimate_within_ci(t, lam):
    est = theta(exact_stable(0.5, seed=21), t, lam, n=100_000)
    assert est.contains(float(erfcx(lam * math.sqrt(t))), 3.0)


def test_theta_properties_closed_form():
    t = np.concatenate([[0.0], np.geomspace(0.01, 10.0, 8)])
    rep = check_theta_properties(exact_stable(0.5), caputo(0.5), t, [0.1, 1.0, 10.0])
    assert rep.details["max_residual"] < 1e-3
    lo, hi = rep.details["band"]
    assert 0.4 <= lo and hi <= 1.1
    assert rep.passed


def test_theta_properties_monte_carlo():
    t = np.geomspace(0.01, 10.0, 5)
    rep = check_theta_properties(exact_stable(0.5, seed=3), caputo(0.5), t, [0.1, 1.0, 10.0],
                                 n=20_000, source="mc")
    assert rep.status in ("pass", "inconclusive")


def test_varkappa_closed_form_values():
    assert float(caputo(0.5).exact["resolvent"](1.0)) == pytest.approx(1 / math.gamma(1.5))


def test_varkappa_monte_carlo():
    est = varkappa(exact_stable(0.5, seed=6), 1.0, n=20_000)[0]
    assert est.contains(1 / math.gamma(1.5), 3.0)


def test_sonine_identity_closed_form():
    rep = varkappa_and_sonine_check(None, caputo(0.5), np.geomspace(0.01, 10, 20))
    assert max(rep.details["deviation"]) < 1e-3
    assert max(rep.details["integral_deviation"]) < 1e-3
    assert rep.passed


def test_sonine_identity_monte_carlo():
    rep = varkappa_and_sonine_check(exact_stable(0.5, seed=8), caputo(0.5), [0.5, 2.0],
                                    n=20_000, source="mc")
    assert rep.passed


def test_first_passage_times_increase():
    levels = np.geomspace(1e-3, 10, 30)
    E = first_passage_times(exact_stable(0.6, seed=1), levels, n=2000)
    assert np.all(np.diff(E, axis=1) >= 0)


def test_paths_strictly_increase():
    assert check_flat_increments(exact_stable(0.5, seed=1), n=20_000)["passed"]
    assert check_flat_increments(compound_poisson(caputo(0.5), 1e-3, seed=1),
                                 n=20_000)["passed"]


def test_cutoff_richardson():
    assert cutoff_richardson(caputo(0.5), 1.0, 1.0, n=50_000)["passed"]


def test_same_seed_same_samples_regardless_of_jobs():
    m = exact_stable(0.5, seed=99)
    a = sample(m, 1.0, 50_000, jobs=1)
    b = sample(m, 1.0, 50_000, jobs=3)
    assert np.array_equal(a, b)


@given(seed=st.integers(0, 2 ** 32), r=st.floats(0.01, 10.0))
def test_samples_are_nonnegative(seed, r):
    assert np.all(sample(exact_stable(0.5, seed=seed), r, 500) >= 0.0)


@given(t=st.floats(1e-3, 1e3), lam=st.floats(1e-2, 1e2))
def test_theta_is_a_probability_and_decreasing(t, lam):
    a = float(theta_closed_form(t, lam))
    b = float(theta_closed_form(2 * t, lam))
    assert 0.0 < b <= a <= 1.0
