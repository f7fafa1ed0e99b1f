"""Reference examples behind ``--selftest``.

Each module has a list of small checks with known answers.  They double as
a smoke test of an installation.
"""

import math

import numpy as np

from .errors import InterptraceError

__all__ = ["EXAMPLES", "run_selftest"]


def _raises(fn, exc=InterptraceError):
    try:
        fn()
    except exc:
        return True
    return False


def _scaling():
    from .scaling import eval_dilation_supremum, fit_membership, power, transform
    half = power(0.5)
    sq = power(2.0, (2.0, 2.0))
    inv = transform(sq, "inverse")
    x = np.array([0.25, 4.0, 9.0])
    third = power(1.0 / 3.0, (1.0 / 3.0, 1.0 / 3.0))
    stab = transform(third, "stability", theta0=0.0, theta1=1.0)
    return [
        ("dilation supremum of t^(1/2) at 4 is 2",
         abs(float(eval_dilation_supremum(half, 4.0)) - 2.0) < 1e-12),
        ("dilation supremum of t at 1 is 1",
         abs(float(eval_dilation_supremum(power(1.0), 1.0)) - 1.0) < 1e-12),
        ("t^0.3 is a member of I_o(0,1)", fit_membership(power(0.3, (0.0, 1.0))).member),
        ("t is not a member of I_o(0,1)", not fit_membership(power(1.0, (0.0, 1.0))).member),
        ("inverse of t^2 is the square root", np.allclose(inv(x), np.sqrt(x), rtol=1e-10)),
        ("stability with theta0=0, theta1=1 keeps t^(1/3)",
         np.allclose(stab(x), np.cbrt(x), rtol=1e-14)),
    ]


def _kernel():
    from .kernel import caputo, extend_kernel, generalized_inverse, laplace_phi
    from dataclasses import replace
    k5 = caputo(0.5)
    trunc = replace(caputo(0.4), T_horizon=1.0)
    ext = extend_kernel(trunc)
    t = np.array([2.0, 10.0, 100.0])
    return [
        ("phi(1) = 1 for caputo(0.3)", abs(float(laplace_phi(caputo(0.3), 1.0)) - 1.0) < 1e-10),
        ("generalized inverse of caputo(0.5) at 1/Gamma(0.5) is 1",
         abs(float(generalized_inverse(k5, 1.0 / math.gamma(0.5))) - 1.0) < 1e-9),
        ("caputo(1) is rejected", _raises(lambda: caputo(1.0))),
        ("truncated power extends to the global power",
         np.allclose(ext(t), caputo(0.4)(t), rtol=1e-8)),
    ]


def _subordinator():
    from .kernel import caputo
    from .subordinator import (compound_poisson, cutoff_for_intensity, exact_stable,
                               sample_path_general, survival_probability, theta_closed_form)
    m = exact_stable(0.5, seed=1)
    k = caputo(0.5)
    cp = compound_poisson(k, cutoff_for_intensity(k, 200.0), seed=1)
    zero = sample_path_general(cp, 0.0, 1000)
    far = survival_probability(m, 1.0, 1e12, n=1000)
    return [
        ("Theta(0, lambda) = 1", all(float(theta_closed_form(0.0, l)) == 1.0
                                     for l in (0.1, 1.0, 10.0))),
        ("S_0 = 0 for every path", bool(np.all(zero == 0.0))),
        ("survival P(S_1 >= t) vanishes for large t", far.value < 0.01),
        ("closed-form resolvent vanishes at 0",
         abs(float(caputo(0.5).exact["resolvent"](np.array([0.0]))[0])) < 1e-15),
    ]


def _weights():
    from .gridfunc import GridFunction
    from .weights import ap_constant, cumulative_W, extend_weight, maximal_function, power_weight
    h = GridFunction(np.array([0.0, 1e-9, 1.0 - 1e-9, 1.0]), np.array([0.0, 1.0, 1.0, 0.0]))
    return [
        ("constant weight has A_2 constant 1", abs(ap_constant(power_weight(0.0)).value - 1.0)
         < 1e-9),
        ("|t|^2 is not in A_2", not ap_constant(power_weight(2.0)).in_ap),
        ("W(2) = 2 for |t|^1", abs(float(cumulative_W(power_weight(1.0), 2.0)) - 2.0) < 1e-12),
        ("maximal function of the unit step at 1/2 is 1",
         abs(maximal_function(h, 0.5) - 1.0) < 1e-6),
        ("eps = 1 is rejected", _raises(lambda: extend_weight(power_weight(0.0), 1.0))),
    ]


def _interp():
    from .interp import SequenceCouple, j_norm_upper, k_functional, phi_norm_integral
    from .scaling import power
    c = SequenceCouple(math.inf, 0.0, math.inf, -1.0, J=8)
    c1 = SequenceCouple(1.0, 0.5, 1.0, -0.5, J=8)
    t = np.array([0.25, 1.0, 4.0])
    e0 = c.unit(0)
    k = 3
    K1 = np.array([k_functional(c1, s, c1.unit(k)) for s in t])
    return [
        ("K(t, e0) = min(1, t)", np.allclose([k_functional(c, s, e0) for s in t],
                                             np.minimum(1.0, t))),
        ("K(t, e_k) = min(2^(k s0), t 2^(k s1)) in l1",
         np.allclose(K1, np.minimum(2.0 ** (0.5 * k), t * 2.0 ** (-0.5 * k)))),
        ("integral norm of 0 is 0", phi_norm_integral(c, power(0.5), 2.0, 0 * e0) == 0.0),
        ("J upper norm of e0 is phi(1)", abs(j_norm_upper(c, power(0.5), 2.0, e0) - 1.0)
         < 1e-12),
    ]


def _volterra():
    from .errors import TruncationError
    from .gridfunc import GridFunction, uniform_time_grid
    from .interp import SequenceCouple
    from .kernel import caputo
    from .volterra import (NormProfile, construct_extension, residual_check,
                           roundtrip_experiment, solve_volterra_forward, trace_bound)
    from .weights import power_weight
    k = caputo(0.5)
    g = uniform_time_grid(1.0, 256)
    zero = GridFunction(g, np.zeros(g.size))
    sol = solve_volterra_forward(k, 2.0, zero)
    const = GridFunction(g, np.full(g.size, 2.0))
    c = SequenceCouple(math.inf, 0.0, math.inf, -1.0, J=8)
    w = power_weight(0.0)
    ext = construct_extension(0 * c.unit(0), c, w, 2.0)
    tt = np.geomspace(1e-3, 1e3, 200)
    flat = NormProfile(tt, np.ones(tt.size), np.zeros(tt.size), np.ones(1))
    er, tr, _ = roundtrip_experiment(0 * c.unit(0), c, w, 2.0)
    return [
        ("f = 0 gives u = u0", np.allclose(sol.u.values, 2.0)),
        ("u = u0, f = 0 has residual 0", residual_check(k, const, zero, 2.0) == 0.0),
        ("a = 0 extends to u = f = 0", ext.norm_u == 0.0 and ext.norm_f == 0.0),
        ("a non-decaying profile is rejected",
         _raises(lambda: trace_bound(flat, w, 2.0), TruncationError)),
        ("a = 0 round trip skips both ratios", math.isnan(er.ratio) and math.isnan(tr.ratio)),
    ]


EXAMPLES = {"scaling": _scaling, "kernel": _kernel, "subordinator": _subordinator,
            "weights": _weights, "interp": _interp, "volterra": _volterra}


def run_selftest(module, stream):
    """Run one module's examples, print one line each, return an exit code."""
    try:
        checks = EXAMPLES[module]()
    except Exception as exc:  # a crash is a failed self test
        stream.write(f"FAIL {module}: {type(exc).__name__}: {exc}\n")
        return 1
    ok = True
    for name, passed in checks:
        stream.write(f"{'ok  ' if passed else 'FAIL'} {module}: {name}\n")
        ok &= bool(passed)
    return 0 if ok else 1
