import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from interptrace import weights as W
from interptrace.errors import ParameterError, PreconditionError, UnsupportedError
from interptrace.gridfunc import GridFunction


def indicator(lo, hi):
    return lambda t: np.where((np.asarray(t) > lo) & (np.asarray(t) < hi), 1.0, 0.0)


# ---------------------------------------------------------------- A_p constant

def test_ap_constant_weight_is_one():
    res = W.ap_constant(W.power_weight(0.0, 2.0))
    assert res.in_ap
    assert res.value == pytest.approx(1.0, abs=1e-12)


def test_ap_square_root_weight_reaches_symmetric_value():
    # symmetric intervals give (1/2)(4/3)(1/2)(4) = 4/3 exactly
    res = W.ap_constant(W.power_weight(0.5, 2.0))
    assert res.in_ap
    assert res.value >= 4.0 / 3.0 - 1e-12


def test_ap_square_root_weight_against_brute_force():
    # closed-form interval integrals over a fine random family of intervals
    rng = np.random.default_rng(3)
    a = -rng.uniform(0, 1, 20000)
    b = rng.uniform(0, 1, 20000)

    def prim(x, g):
        return np.sign(x) * np.abs(x) ** (1 + g) / (1 + g)

    L = b - a
    prod = (prim(b, 0.5) - prim(a, 0.5)) / L * (prim(b, -0.5) - prim(a, -0.5)) / L
    brute = prod.max()
    res = W.ap_constant(W.power_weight(0.5, 2.0))
    # the dyadic family is a lower bound of the full supremum
    assert 4.0 / 3.0 - 1e-12 <= res.value <= brute * (1 + 1e-9)


def test_ap_quadratic_weight_not_in_a2():
    res = W.ap_constant(W.power_weight(2.0, 2.0))
    assert not res.in_ap
    assert math.isinf(res.value)
    a, b = res.witness
    assert a <= 0.0 <= b


@pytest.mark.parametrize("gamma,p,finite", [
    (-0.9, 2.0, True), (0.0, 2.0, True), (0.9, 2.0, True),
    (-1.0, 2.0, False), (1.0, 2.0, False), (1.5, 2.0, False),
    (1.5, 3.0, True), (2.0, 3.0, False), (-0.5, 1.5, True), (0.6, 1.5, False),
])
def test_ap_finite_iff_gamma_in_range(gamma, p, finite):
    assert W.ap_constant(W.power_weight(gamma, p)).in_ap is finite


@given(st.floats(-0.9, 0.9))
def test_ap_monotone_in_budget(gamma):
    w = W.power_weight(gamma, 2.0)
    small = W.ap_constant(w, (6, 3)).value
    large = W.ap_constant(w, (12, 6)).value
    assert small <= large * (1 + 1e-12)


def test_ap_rejects_p_not_above_one():
    with pytest.raises(ParameterError):
        W.ap_constant(W.power_weight(0.0, 2.0), p=1.0)


# ---------------------------------------------------------------- W and scaling

def test_cumulative_w_linear_weight():
    assert W.cumulative_W(W.power_weight(1.0), 2.0) == pytest.approx(2.0, rel=1e-12)


@given(st.floats(-0.95, 3.0), st.floats(1e-3, 1e3))
def test_cumulative_w_power_closed_form(gamma, t):
    got = W.cumulative_W(W.power_weight(gamma, 5.0), t)
    assert got == pytest.approx(t ** (1 + gamma) / (1 + gamma), rel=1e-10)


def test_cumulative_w_rejects_nonpositive_t():
    with pytest.raises(ParameterError):
        W.cumulative_W(W.power_weight(0.0), 0.0)


def test_scaling_check_constant_weight():
    fit = W.scaling_check(W.power_weight(0.0, 2.0))
    assert fit.member
    assert fit.a_hat == pytest.approx(1.0, abs=1e-9)
    assert fit.b_hat == pytest.approx(1.0, abs=1e-9)


def test_scaling_check_square_root_weight():
    fit = W.scaling_check(W.power_weight(0.5, 2.0))
    assert fit.member
    assert fit.a_hat == pytest.approx(1.5, abs=1e-9)
    assert fit.b_hat == pytest.approx(1.5, abs=1e-9)


def test_tabulated_weight_primitive():
    t = np.geomspace(1e-3, 1e3, 200)
    w = W.tabulated_weight(t, t ** 0.5)
    assert W.cumulative_W(w, 1.0) == pytest.approx(2.0 / 3.0, rel=1e-3)


def test_power_weight_json_round_trip():
    w = W.power_weight(0.5, 3.0)
    back = W.WeightSpec.from_json(w.to_json())
    t = np.array([0.1, 1.0, 7.0])
    assert np.allclose(back(t), w(t))
    assert back.p == 3.0


# ---------------------------------------------------------------- maximal function

def _indicator_grid():
    x = np.linspace(-1.0, 3.0, 4001)
    return GridFunction(x, ((x >= 0) & (x <= 1)).astype(float))


def test_maximal_indicator_outside_support():
    # the best interval is [0, 2]; the linear edge adds half a cell of mass
    assert W.maximal_function(_indicator_grid(), 2.0) == pytest.approx(0.5, abs=1e-3)


def test_maximal_indicator_inside_support():
    assert W.maximal_function(_indicator_grid(), 0.5) == pytest.approx(1.0, abs=1e-12)


def test_maximal_indicator_matches_brute_force():
    h = _indicator_grid()
    x = h.grid
    prefix = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(x) * (h.values[1:] + h.values[:-1]))])
    idx = np.arange(0, x.size, 50)
    t_idx = int(np.searchsorted(x, 2.0))
    A = idx[idx <= t_idx]
    B = idx[idx >= t_idx]
    brute = max((prefix[b] - prefix[a]) / (x[b] - x[a]) for a in A for b in B if b > a)
    assert W.maximal_function(h, 2.0) >= brute - 1e-12


@given(st.integers(0, 10_000))
def test_maximal_dominates_function(seed):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(-5, 5, 60))
    h = GridFunction(x, rng.normal(size=60))
    m = W.maximal_values(h)
    assert np.all(m >= np.abs(h.values) - 1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_smoothed_average_bounded_by_maximal(seed):
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 60.0, 3001)
    levels = rng.uniform(0.0, 1.0, 30)
    h = GridFunction(x, levels[np.minimum((x / 2.0).astype(int), 29)])
    ratio = W.smoothed_average_ratio(h, np.geomspace(0.05, 10.0, 15))
    assert np.all(ratio < 10.0)


# ---------------------------------------------------------------- Hardy constants

def test_trace_pair_constant_weight_unit_constant():
    res = W.hardy_constants(W.trace_pair(W.power_weight(0.0, 2.0)), 2.0)
    assert res.B == pytest.approx(1.0, rel=1e-8)


@given(st.floats(-0.8, 0.8), st.sampled_from([1.5, 2.0, 3.0]))
def test_trace_pair_r_independent_for_powers(gamma, p):
    if gamma >= p - 1:
        return
    res = W.hardy_constants(W.trace_pair(W.power_weight(gamma, p)), p,
                            points_per_decade=8)
    assert res.r_variation(1e-4, 1e4) < 0.01


def test_trace_pair_symbolic_value():
    # U^p = t^{γ-p}/(1+γ), 1/V^{p'} = t^{-γ/(p-1)}: both integrals are powers
    gamma, p = 0.5, 2.0
    q = p / (p - 1)
    u = (1.0 / ((1 + gamma) * (p - gamma - 1))) ** (1 / p)
    v = (1.0 / (1 - gamma / (p - 1))) ** (1 / q)
    res = W.hardy_constants(W.trace_pair(W.power_weight(gamma, p)), p)
    assert res.B == pytest.approx(u * v, rel=1e-8)


@pytest.mark.parametrize("ppd", [8, 16])
def test_extension_pairs_finite_and_stable(ppd):
    zero, inf = W.extension_pairs(W.power_weight(0.0, 2.0))
    b0 = W.hardy_constants(zero, 2.0, points_per_decade=ppd).B
    b1 = W.hardy_constants(inf, 2.0, points_per_decade=ppd).B
    b0f = W.hardy_constants(zero, 2.0, points_per_decade=2 * ppd).B
    b1f = W.hardy_constants(inf, 2.0, points_per_decade=2 * ppd).B
    assert math.isfinite(b0) and math.isfinite(b1)
    assert abs(b0 / b0f - 1) < 0.01 and abs(b1 / b1f - 1) < 0.01


def test_zero_v_gives_infinite_constant():
    pair = W.HardyPair(lambda t: np.ones_like(np.asarray(t, float)),
                       lambda t: np.zeros_like(np.asarray(t, float)))
    res = W.hardy_constants(pair, 2.0)
    assert math.isinf(res.B)
    assert res.diagnostics["v_infinite"]


def test_unknown_direction_rejected():
    with pytest.raises(ParameterError):
        W.HardyPair(indicator(0, 1), indicator(0, 1), "sideways")


def test_hardy_empirical_unit_interval_pair():
    pair = W.HardyPair(indicator(0, 1), indicator(0, 1), "from_zero", (1.0,))
    res = W.hardy_empirical(pair, 2.0, trials=100)
    # f ≡ 1 on (0, 1): ‖t‖_{L2(0,1)} / ‖1‖_{L2(0,1)} = 1/√3
    assert res["C_emp"] >= 1.0 / math.sqrt(3.0) - 1e-3
    assert res["B"] == pytest.approx(0.5, rel=1e-2)
    assert res["passed"]


@pytest.mark.parametrize("gamma", [-0.5, 0.0, 0.5])
@pytest.mark.parametrize("direction", ["trace", "zero", "infinity"])
def test_hardy_empirical_within_calibrated_bound(gamma, direction):
    w = W.power_weight(gamma, 2.0)
    pair = {"trace": W.trace_pair(w), "zero": W.extension_pairs(w)[0],
            "infinity": W.extension_pairs(w)[1]}[direction]
    res = W.hardy_empirical(pair, 2.0, trials=60, seed=7)
    assert res["C_emp"] <= res["bound"]


def test_hardy_empirical_skips_zero_functions():
    pair = W.trace_pair(W.power_weight(0.0, 2.0))
    res = W.hardy_empirical(pair, 2.0, trials=40)
    assert 0 < res["trials"] <= 40


def test_hardy_empirical_requires_finite_b():
    pair = W.HardyPair(lambda t: np.ones_like(np.asarray(t, float)),
                       lambda t: np.zeros_like(np.asarray(t, float)))
    with pytest.raises(PreconditionError):
        W.hardy_empirical(pair, 2.0, trials=5)


def test_hardy_c_muckenhoupt_constant():
    p = 2.0
    q = p / (p - 1)
    assert W.hardy_c(p) == pytest.approx(p ** (1 / p) * q ** (1 / q))


# ---------------------------------------------------------------- weight extension

def test_extend_constant_weight():
    ext = W.extend_weight(W.power_weight(0.0, 2.0), 0.1, T=1.0)
    assert np.allclose(ext(np.array([0.1, 0.5, 0.9])), 1.0)
    assert W.fit_tail_slope(ext, 1e3, 1e6) == pytest.approx(-0.9, abs=0.05)
    assert W.fit_tail_slope(lambda t: ext(-t), 1e3, 1e6) == pytest.approx(-0.9, abs=0.05)
    assert W.ap_constant(ext).in_ap


def test_extend_square_root_weight_in_a2():
    ext = W.extend_weight(W.power_weight(0.5, 2.0), 0.1, T=1.0)
    res = W.ap_constant(ext)
    assert res.in_ap and math.isfinite(res.value)
    assert ext(0.25) == pytest.approx(0.5)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.3])
def test_extension_tail_exponent(eps):
    ext = W.extend_weight(W.power_weight(-0.3, 2.0), eps, T=2.0)
    assert W.fit_tail_slope(ext, 1e4, 1e7) == pytest.approx(-1 + eps, abs=0.05)


@pytest.mark.parametrize("eps", [1.0, 1.5, 0.0, -0.1])
def test_extension_rejects_bad_eps(eps):
    with pytest.raises(ParameterError):
        W.extend_weight(W.power_weight(0.0, 2.0), eps, T=1.0)


def test_extension_of_non_power_needs_factors():
    t = np.geomspace(1e-3, 1.0, 50)
    w0 = W.tabulated_weight(t, 1.0 + t)
    with pytest.raises(UnsupportedError):
        W.extend_weight(w0, 0.1, T=1.0)


def test_extension_with_supplied_factors():
    t = np.geomspace(1e-6, 10.0, 200)
    w0 = W.tabulated_weight(t, np.ones_like(t))
    ext = W.extend_weight(w0, 0.1, factors=(W.power_weight(0.0), W.power_weight(0.0)), T=1.0)
    assert W.fit_tail_slope(ext, 1e3, 1e6) == pytest.approx(-0.9, abs=0.05)
