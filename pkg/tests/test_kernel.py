import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import gamma

from interptrace.errors import (NotExtendableError, ParameterError, PreconditionError,
                                RangeError)
from interptrace.kernel import (KernelSpec, caputo, check_kernel_phi_equivalence, custom,
                                extend_kernel, generalized_inverse, kappa_star_psi,
                                laplace_phi, phi_derivative, sum_of_powers, tabulated)
from interptrace.scaling import GridSpec, eval_dilation_supremum


def mp_laplace_phi(f, lam):
    """λ ∫₀^∞ e^{-λt} κ(t) dt by mpmath tanh-sinh quadrature."""
    lam = mpmath.mpf(lam)
    return float(lam * mpmath.quad(lambda t: mpmath.e ** (-lam * t) * f(t),
                                   [0, 1 / lam, mpmath.inf]))


def numeric(kappa):
    """The same kernel with its closed forms removed."""
    return custom(kappa.evaluator, grid=kappa.grid)


def test_caputo_half_at_four():
    assert float(laplace_phi(caputo(0.5), 4.0)) == pytest.approx(2.0, rel=1e-14)


def test_caputo_at_one():
    assert float(laplace_phi(caputo(0.3), 1.0)) == pytest.approx(1.0, rel=1e-14)


def test_sum_of_powers_at_one():
    assert float(laplace_phi(sum_of_powers([(1, 0.3), (1, 0.7)]), 1.0)) == \
        pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("lam", [1e-3, 0.5, 30.0])
def test_numeric_laplace_matches_symbolic(alpha, lam):
    # the quadrature path, checked against the symbolic transform λ^α
    assert float(laplace_phi(numeric(caputo(alpha)), lam)) == \
        pytest.approx(lam ** alpha, rel=1e-8)


def test_numeric_laplace_of_mixed_kernel_matches_mpmath():
    k = custom(lambda t: np.exp(-t) / np.sqrt(t) + 1.0 / (1.0 + t) ** 1.5)
    f = lambda t: mpmath.e ** (-t) / mpmath.sqrt(t) + 1 / (1 + t) ** 1.5
    for lam in (0.01, 1.0, 100.0):
        assert float(laplace_phi(k, lam)) == pytest.approx(mp_laplace_phi(f, lam), rel=1e-7)


def test_generalized_inverse_values():
    k = caputo(0.5)
    assert float(generalized_inverse(k, 1 / math.gamma(0.5))) == pytest.approx(1.0, rel=1e-10)
    assert float(generalized_inverse(k, 1.0)) == pytest.approx(math.gamma(0.5) ** -2, rel=1e-10)


def test_generalized_inverse_jump_location():
    step = tabulated([1e-8, 1.0, 2.0, 1e8], [2.0, 1.0, 1e-3, 1e-9], interp="step")
    assert float(generalized_inverse(step, 1.5)) == pytest.approx(1.0, rel=1e-9)


def test_generalized_inverse_out_of_range():
    with pytest.raises(RangeError) as err:
        generalized_inverse(tabulated([1e-8, 1e8], [10.0, 1.0], grid=GridSpec()), 100.0)
    assert err.value.achievable is not None


@given(alpha=st.floats(0.1, 0.9), lt=st.floats(-7, 7))
def test_generalized_inverse_is_two_sided(alpha, lt):
    k = numeric(caputo(alpha))
    lam = float(k(10.0 ** lt))
    assert float(k(generalized_inverse(k, lam))) == pytest.approx(lam, rel=1e-10)


def test_kappa_star_and_psi():
    ks, psi = kappa_star_psi(caputo(0.5), np.array([1.0, 4.0]))
    assert ks[0] == pytest.approx(math.gamma(0.5) ** -2, rel=1e-10)
    assert psi[0] == pytest.approx(1.0, rel=1e-10)
    assert psi[1] == pytest.approx(16.0, rel=1e-10)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_kappa_star_closed_form(alpha):
    t = np.geomspace(1e-2, 1e2, 7)
    ks, psi = kappa_star_psi(numeric(caputo(alpha)), t)
    assert np.allclose(ks, gamma(1 - alpha) ** (-1 / alpha) * t ** (1 / alpha), rtol=1e-9)
    ratio = ks / psi
    assert ratio.max() / ratio.min() == pytest.approx(1.0, abs=1e-6)


def test_kappa_star_psi_band_for_mixture():
    t = np.geomspace(1e-2, 1e2, 25)
    ks, psi = kappa_star_psi(sum_of_powers([(1, 0.3), (1, 0.7)]), t)
    r = ks / psi
    assert r.max() / r.min() < 10


def test_caputo_order_one_rejected():
    with pytest.raises(ParameterError):
        caputo(1.0)


@pytest.mark.parametrize("alpha, const", [(0.5, math.gamma(0.5)), (0.3, math.gamma(0.7))])
def test_equivalence_ratio_is_gamma(alpha, const):
    rep = check_kernel_phi_equivalence(caputo(alpha), np.geomspace(1e-4, 1e4, 17))
    assert rep.ratio_min == pytest.approx(const, rel=1e-6)
    assert rep.ratio_max == pytest.approx(const, rel=1e-6)
    assert rep.passed


def test_equivalence_band_of_mixture():
    lam = np.geomspace(1e-6, 1e6, 25)
    rep = check_kernel_phi_equivalence(sum_of_powers([(1, 0.3), (1, 0.7)]), lam)
    assert rep.ratio_min >= 1.0 - 1e-12
    assert rep.ratio_max <= 2 * math.gamma(0.3)
    assert rep.passed


def test_equivalence_needs_membership():
    with pytest.raises(PreconditionError):
        check_kernel_phi_equivalence(custom(lambda t: t ** -1.2),
                                     np.geomspace(0.1, 10, 5))


@pytest.mark.parametrize("T", [1.0, 2.0])
def test_truncated_power_extends_to_global(T):
    k = caputo(0.5)
    ext = extend_kernel(replace(k, T_horizon=T))
    t = np.geomspace(T, 1e4 * T, 41)
    assert np.allclose(ext(t), k(t), rtol=1e-8)


def test_extension_keeps_dilation_function():
    k = caputo(0.4)
    ext = extend_kernel(replace(k, T_horizon=1.0))
    for j in range(-8, 9):
        lam = 2.0 ** j
        assert eval_dilation_supremum(ext, lam) / eval_dilation_supremum(k, lam) == \
            pytest.approx(1.0, abs=0.05)


def test_extension_rejects_increasing_kernel():
    k = custom(lambda t: np.exp(t) * t ** -0.5, T_horizon=1.0)
    with pytest.raises(PreconditionError):
        extend_kernel(k)


def test_extension_reports_violated_side():
    k = custom(lambda t: t ** -1.2, T_horizon=1.0)
    with pytest.raises(NotExtendableError) as err:
        extend_kernel(k)
    assert err.value.side == "lower"


def test_extension_needs_horizon():
    with pytest.raises(PreconditionError):
        extend_kernel(caputo(0.5))


@given(alpha=st.floats(0.1, 0.9))
def test_phi_is_increasing_and_concave(alpha):
    lam = np.geomspace(1e-3, 1e3, 40)
    phi = laplace_phi(numeric(caputo(alpha)), lam)
    assert np.all(np.diff(phi) > 0)
    x = np.linspace(0.1, 10, 40)
    v = laplace_phi(numeric(caputo(alpha)), x)
    assert np.all(np.diff(v, 2) <= 1e-8)


@given(alpha=st.floats(0.1, 0.9), lg=st.floats(-3, 3))
def test_derivative_bounds(alpha, lg):
    k = numeric(caputo(alpha))
    lam = 10.0 ** lg
    phi = float(laplace_phi(k, lam))
    dphi = float(phi_derivative(k, lam))
    assert lam * dphi <= phi * (1 + 1e-6)
    assert dphi == pytest.approx(alpha * lam ** (alpha - 1), rel=1e-5)


def test_invariants_hold_for_standard_kernels():
    assert caputo(0.5).check_invariants() == []
    assert sum_of_powers([(1, 0.3), (2, 0.6)]).check_invariants() == []
    bad = custom(lambda t: 1.0 + 0 * t)
    assert bad.check_invariants()


@pytest.mark.parametrize("desc", [
    {"family": "caputo", "alpha": 0.5},
    {"family": "sum_of_powers", "terms": [[1, 0.3], [0.5, 0.7]]},
    {"family": "tabulated", "t": [0.1, 1, 10], "values": [3, 1, 0.3]},
])
def test_json_round_trip(desc):
    k = KernelSpec.from_json(desc)
    again = KernelSpec.from_json(k.to_json())
    t = np.geomspace(0.05, 20, 9)
    assert np.array_equal(k(t), again(t))
