import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import exp1, gamma

from interptrace import interp as I
from interptrace import volterra as V
from interptrace import weights as W
from interptrace.errors import GridError, PreconditionError, TruncationError
from interptrace.gridfunc import GridFunction, uniform_time_grid
from interptrace.kernel import caputo

LN2 = math.log(2.0)


def couple(J=8):
    return I.SequenceCouple(math.inf, 0.0, math.inf, -1.0, J)


# ---------------------------------------------------------------- forward solver

@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_constant_forcing(alpha):
    g = uniform_time_grid(2.0, 2048)
    sol = V.solve_volterra_forward(caputo(alpha), 1.0, GridFunction(g, 2.0 * np.ones_like(g)))
    assert sol.residual < 1e-3
    exact = 1.0 + 2.0 * g ** alpha / gamma(1 + alpha)
    away = g >= 0.1
    assert np.max(np.abs(sol.u.values[away] - exact[away])) < 1e-3


def test_zero_forcing_keeps_initial_value():
    g = uniform_time_grid(1.0, 256)
    sol = V.solve_volterra_forward(caputo(0.5), 3.0, GridFunction(g, np.zeros_like(g)))
    assert np.all(sol.u.values == 3.0)
    assert sol.residual == 0.0


def test_linear_forcing():
    g = uniform_time_grid(2.0, 2048)
    sol = V.solve_volterra_forward(caputo(0.5), 0.0, GridFunction(g, g.copy()))
    assert np.max(np.abs(sol.u.values - g ** 1.5 / gamma(2.5))) < 1e-4


def test_initial_value_exact():
    g = uniform_time_grid(1.0, 128)
    sol = V.solve_volterra_forward(caputo(0.4), 0.7, GridFunction(g, np.cos(g)))
    assert sol.u.values[0] == 0.7


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_residual_first_order(alpha):
    res = []
    for M in (256, 512, 1024):
        g = uniform_time_grid(2.0, M)
        res.append(V.solve_volterra_forward(caputo(alpha), 0.0,
                                            GridFunction(g, np.ones_like(g))).residual)
    assert res[0] / res[1] >= 1.9 and res[1] / res[2] >= 1.9


def test_residual_linear_in_perturbation():
    g = uniform_time_grid(2.0, 1024)
    k = caputo(0.5)
    f = GridFunction(g, np.ones_like(g))
    exact = g ** 0.5 / gamma(1.5)
    bump = np.sin(np.pi * g / 2.0) ** 2
    r1 = V.residual_check(k, GridFunction(g, exact + 1e-2 * bump), f, 0.0)
    r2 = V.residual_check(k, GridFunction(g, exact + 2e-2 * bump), f, 0.0)
    assert r2 / r1 == pytest.approx(2.0, rel=0.05)


def test_residual_trivial_pair():
    g = uniform_time_grid(1.0, 64)
    assert V.residual_check(caputo(0.5), GridFunction(g, np.full_like(g, 2.0)),
                            GridFunction(g, np.zeros_like(g)), 2.0) == 0.0


def test_solver_requires_uniform_grid():
    g = np.concatenate([[0.0], np.geomspace(1e-3, 1.0, 50)])
    with pytest.raises(GridError):
        V.solve_volterra_forward(caputo(0.5), 0.0, GridFunction(g, np.ones_like(g)))


def test_solver_vector_valued():
    g = uniform_time_grid(1.0, 512)
    f = GridFunction(g, np.stack([np.ones_like(g), 2 * np.ones_like(g)], axis=1))
    sol = V.solve_volterra_forward(caputo(0.5), np.array([0.0, 1.0]), f)
    assert np.allclose(sol.u.values[:, 1] - 1.0, 2.0 * sol.u.values[:, 0])


# ---------------------------------------------------------------- extension

def test_local_single_block_closed_form():
    c = couple()
    ext = V.construct_extension(c.unit(0), c, W.power_weight(0.0, 2.0), 2.0)
    t = np.array([0.01, 0.3, 1.0, 5.0])
    u = (exp1(t) - exp1(2 * t)) / LN2
    f = -(np.exp(-t) - np.exp(-2 * t)) / (t * LN2)
    assert np.allclose(ext.u(t)[:, 8], u, rtol=1e-12)
    assert np.allclose(ext.f(t)[:, 8], f, rtol=1e-12)
    U = lambda s: ((exp1(s) - exp1(2 * s)) / LN2) ** 2
    F = lambda s: ((np.exp(-s) - np.exp(-2 * s)) / (s * LN2)) ** 2
    nu = math.sqrt(quad(U, 0, 1)[0] + quad(U, 1, np.inf)[0])
    nf = math.sqrt(quad(F, 0, 1)[0] + quad(F, 1, np.inf)[0])
    assert ext.norm_u == pytest.approx(nu, rel=1e-8)
    assert ext.norm_f == pytest.approx(nf, rel=1e-8)


def test_zero_data_gives_zero_pair():
    c = couple()
    ext = V.construct_extension(np.zeros(17), c, W.power_weight(0.0, 2.0))
    assert ext.norm_u == 0.0 and ext.norm_f == 0.0
    assert np.all(ext.u(np.array([0.5, 2.0])) == 0)
    e, t, _ = V.roundtrip_experiment(np.zeros(17), c, W.power_weight(0.0, 2.0))
    assert math.isnan(e.ratio) and math.isnan(t.ratio)


@pytest.mark.parametrize("mode", ["local", "nonlocal"])
def test_extension_starts_at_data(mode):
    c = couple()
    a = c.unit(-2, 0.3) + c.unit(3, -1.2)
    ext = V.construct_extension(a, c, W.power_weight(-0.5, 2.0), 2.0, mode, caputo(0.5))
    assert np.array_equal(ext.u(np.array([0.0]))[0], a)


@pytest.mark.parametrize("k", [-3, 0, 3])
@pytest.mark.parametrize("gamma_", [-0.5, 0.0, 0.5])
def test_local_defining_equation(k, gamma_):
    c = couple()
    ext = V.construct_extension(c.unit(k), c, W.power_weight(gamma_, 2.0))
    assert ext.residual() < 1e-10


@pytest.mark.parametrize("k", [-2, 0, 2])
def test_nonlocal_closed_form_residual(k):
    c = couple()
    ext = V.construct_extension(c.unit(k), c, W.power_weight(-0.5, 2.0), 2.0, "nonlocal",
                                caputo(0.5))
    assert ext.theta_source == "closed_form"
    assert ext.residual() <= 5e-3
    assert math.isfinite(ext.norm_u) and math.isfinite(ext.norm_f)


def test_nonlocal_monte_carlo_theta():
    c = couple()
    w = W.power_weight(-0.5, 2.0)
    mc = V.construct_extension(c.unit(0), c, w, 2.0, "nonlocal", caputo(0.5),
                               theta_source="mc", n_mc=2000)
    cf = V.construct_extension(c.unit(0), c, w, 2.0, "nonlocal", caputo(0.5))
    assert mc.ci > 0
    total_mc, total_cf = mc.norm_u + mc.norm_f, cf.norm_u + cf.norm_f
    assert abs(total_mc - total_cf) <= 3 * mc.ci + 0.02 * total_cf


def test_extension_needs_certified_parameter():
    c = couple()
    # W = t^3 / 3 gives W^{1/2} ∉ I_o(0, 1)
    with pytest.raises(PreconditionError):
        V.construct_extension(c.unit(0), c, W.power_weight(2.0, 2.0))


@given(st.floats(-0.5, 0.5), st.integers(-3, 3), st.floats(0.1, 10.0))
@settings(max_examples=10)
def test_roundtrip_scale_invariant(gamma_, k, scale):
    c = couple()
    w = W.power_weight(gamma_, 2.0)
    e1, t1, _ = V.roundtrip_experiment(c.unit(k), c, w)
    e2, t2, _ = V.roundtrip_experiment(c.unit(k, 10.0 * scale), c, w)
    assert abs(e2.ratio / e1.ratio - 1) < 1e-6
    assert abs(t2.ratio / t1.ratio - 1) < 1e-6


def test_weight_monotonicity():
    c = couple()
    a = c.unit(1)
    t = np.geomspace(1e-6, 1e6, 400)
    small = W.power_weight(0.0, 2.0)
    large = W.tabulated_weight(t, 1.0 + np.minimum(t, 1.0))
    e_small = V.construct_extension(a, c, small)
    e_large = V.construct_extension(a, c, large)
    assert e_large.norm_u >= e_small.norm_u
    assert e_large.norm_f >= e_small.norm_f


# ---------------------------------------------------------------- trace bound

def test_trace_bound_local_unit_vector():
    c = couple()
    w = W.power_weight(0.0, 2.0)
    ext = V.construct_extension(c.unit(0), c, w)
    tb = V.trace_bound(ext, w)
    assert math.isfinite(tb.bound)
    assert tb.direct == pytest.approx(math.sqrt(2), rel=1e-10)
    assert tb.bound / tb.direct < 10


def test_trace_bound_rejects_non_decaying_pair():
    c = couple()
    g = np.concatenate([[0.0], np.geomspace(1e-6, 1e3, 300)])
    U = np.tile(c.unit(0), (g.size, 1))
    prof = V.profile_from_samples(GridFunction(g, U), GridFunction(g, np.zeros_like(U)), c)
    with pytest.raises(TruncationError):
        V.trace_bound(prof, W.power_weight(0.0, 2.0))


def test_trace_bound_boundary_case_rejected():
    # (α, γ, q) = (0.5, 0, 2) puts (1+γ)/α on p itself, so (W∘ψ)^{1/2} ≃ t is not certified
    B = I.BesovCouple(2, 2.0, 0.0, 256)
    with pytest.raises(PreconditionError):
        V.construct_extension(B.mode(4), B, W.power_weight(0.0, 2.0), 2.0, "nonlocal",
                              caputo(0.5))


@pytest.mark.parametrize("alpha,gamma_", [(0.75, 0.0), (0.5, -0.5)])
def test_trace_bound_besov_scaling(alpha, gamma_):
    # a single frequency 2^k has norm ≃ 2^{ks} with s = s₀ − s₀(1+γ)/(qα)
    B = I.BesovCouple(2, 2.0, 0.0, 256)
    w = W.power_weight(gamma_, 2.0)
    s = 2.0 - 2.0 * (1 + gamma_) / (2.0 * alpha)
    scaled = []
    for k in range(2, 7):
        ext = V.construct_extension(B.mode(2 ** k), B, w, 2.0, "nonlocal", caputo(alpha))
        scaled.append(V.trace_bound(ext, w, 2.0, caputo(alpha)).bound / 2.0 ** (k * s))
    assert max(scaled) / min(scaled) < 4


# ---------------------------------------------------------------- finite interval

def test_finite_interval_local_close_to_half_line():
    c = couple()
    w = W.power_weight(0.0, 2.0)
    ext = V.construct_extension(c.unit(0), c, w)
    half = V.trace_bound(ext, w).bound
    fin = V.finite_interval_trace(ext, 4.0, c, w)
    assert fin.bound / half < 10


def test_finite_interval_constant_trajectory():
    c = couple()
    w = W.power_weight(0.0, 2.0)
    g = np.concatenate([[0.0], np.geomspace(1e-6, 4.0, 400)])
    U = np.tile(c.unit(0), (g.size, 1))
    res = V.finite_interval_trace((GridFunction(g, U), GridFunction(g, np.zeros_like(U))),
                                  4.0, c, w)
    assert math.isfinite(res.bound)
    assert 1.0 <= res.bound / res.direct < 10


@pytest.mark.parametrize("mode", ["local", "nonlocal"])
def test_finite_interval_converges(mode):
    c = couple()
    kernel = caputo(0.5) if mode == "nonlocal" else None
    w = W.power_weight(-0.5, 2.0)
    ext = V.construct_extension(c.unit(0), c, w, 2.0, mode, kernel)
    half = V.trace_bound(ext, w, 2.0, kernel).bound
    fin = V.finite_interval_trace(ext, 1e4, c, w, 2.0, kernel)
    assert abs(fin.bound / half - 1) < 0.05


def test_finite_interval_needs_embedding():
    c = I.SequenceCouple(math.inf, -1.0, math.inf, 0.0, 8)
    ext = V.construct_extension(couple().unit(0), couple(), W.power_weight(0.0, 2.0))
    with pytest.raises(PreconditionError):
        V.finite_interval_trace(ext, 4.0, c, W.power_weight(0.0, 2.0))


def test_smoothstep_cutoff():
    T = 2.0
    s = np.linspace(0, 3, 301)
    z, dz = V.smoothstep_cutoff(s, T)
    assert np.all(z[s <= T / 2] == 1) and np.all(z[s >= T] == 0)
    assert np.allclose(np.gradient(z, s)[5:-5], dz[5:-5], atol=2e-3)


# ---------------------------------------------------------------- battery

def test_local_battery_band():
    c = couple(8)
    ext, tr = [], []
    for g in (0.0, 0.5):
        for k in range(-5, 6):
            e, t, _ = V.roundtrip_experiment(c.unit(k), c, W.power_weight(g, 2.0))
            ext.append(e.ratio)
            tr.append(t.ratio)
    for r in (ext, tr):
        assert np.all(np.isfinite(r))
        assert max(r) / min(r) < 100


def test_default_battery_rows():
    rows = V.run_battery()
    assert len(rows) == 22
    assert all(math.isfinite(r["ext_ratio"]) and math.isfinite(r["trace_ratio"]) for r in rows)
    assert [r["case_id"] for r in rows] == [c["case_id"] for c in V.default_battery()["cases"]]
