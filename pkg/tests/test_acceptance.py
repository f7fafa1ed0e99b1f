"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run directly with ``python3 tests/test_acceptance.py`` or through pytest.
"""
import json
import math
import sys
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np
import pytest
from scipy.special import erfcx, gamma

from interptrace import cli
from interptrace import interp as I
from interptrace import volterra as V
from interptrace import weights as W
from interptrace.kernel import (caputo, check_kernel_phi_equivalence, extend_kernel,
                                laplace_phi, sum_of_powers)
from interptrace.scaling import power
from interptrace.subordinator import (check_theta_properties, compound_poisson,
                                      cutoff_for_intensity, exact_stable, laplace_check, theta,
                                      varkappa_and_sonine_check)

BASELINE = Path(__file__).parent / "data" / "battery_baseline.json"
BATTERY = str(resources.files("interptrace") / "data" / "battery.json")


@pytest.fixture
def verdict(capsys):
    def report(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return report


def test_criterion_01_caputo_laplace(verdict):
    start = time.perf_counter()
    lam = np.geomspace(1e-4, 1e4, 81)
    worst = 0.0
    for alpha in (0.1, 0.3, 0.5, 0.7, 0.9):
        got = laplace_phi(caputo(alpha), lam, method="quadrature")
        worst = max(worst, float(np.max(np.abs(got / lam ** alpha - 1.0))))
    elapsed = time.perf_counter() - start
    verdict(1, worst < 1e-8 and elapsed < 5.0,
            f"max relative error {worst:.2e}, {elapsed:.2f} s")


def test_criterion_02_kernel_phi_equivalence(verdict):
    lam = np.geomspace(1e-4, 1e4, 17)
    worst = 0.0
    for alpha in (0.1, 0.3, 0.5, 0.7, 0.9):
        rep = check_kernel_phi_equivalence(caputo(alpha), lam)
        const = gamma(1.0 - alpha)
        worst = max(worst, abs(rep.ratio_min / const - 1), abs(rep.ratio_max / const - 1))
    mix = check_kernel_phi_equivalence(sum_of_powers([(1.0, 0.3), (1.0, 0.7)]),
                                       np.geomspace(1e-6, 1e6, 25))
    ok = worst < 1e-6 and math.isfinite(mix.ratio_max) and mix.refinement_delta < 0.01
    verdict(2, ok, f"caputo ratio deviation {worst:.2e}; mixture band "
                   f"[{mix.ratio_min:.4f}, {mix.ratio_max:.4f}], drift {mix.refinement_delta:.2e}")


CASES_3 = [(0.5, 1.0, 0.3), (1.0, 3.0, 0.3), (2.0, 0.5, 0.3),
           (0.5, 1.0, 0.5), (1.0, 3.0, 0.5), (2.0, 0.5, 0.5),
           (0.5, 1.0, 0.8), (1.0, 3.0, 0.8), (2.0, 0.5, 0.8)]


def test_criterion_03_subordinator_laplace(verdict):
    start = time.perf_counter()
    misses = []
    for i, (r, lam, alpha) in enumerate(CASES_3):
        models = {"exact": exact_stable(alpha, seed=100 + i),
                  "compound_poisson": compound_poisson(caputo(alpha), _cutoff(alpha),
                                                       seed=200 + i)}
        for name, model in models.items():
            est, _ = laplace_check(model, r, lam, n=100_000)
            if not est.contains(math.exp(-r * lam ** alpha), 3.0):
                misses.append((name, r, lam, alpha))
    elapsed = time.perf_counter() - start
    verdict(3, not misses and elapsed < 60.0,
            f"{2 * len(CASES_3) - len(misses)}/{2 * len(CASES_3)} within 3 CI, {elapsed:.1f} s"
            + (f", misses {misses}" if misses else ""))


def _cutoff(alpha):
    return cutoff_for_intensity(caputo(alpha), 200.0)


def test_criterion_04_theta_closed_form(verdict):
    t_grid = np.geomspace(0.01, 10.0, 5)
    lam_grid = np.geomspace(0.1, 10.0, 5)
    model = exact_stable(0.5, seed=11)
    misses, ratios = 0, []
    for t in t_grid:
        for lam in lam_grid:
            exact = float(erfcx(lam * math.sqrt(t)))
            est = theta(model, t, lam, n=100_000)
            misses += not est.contains(exact, 3.0)
            ratios.append(est.value / min(1.0, math.sqrt(1.0 / t) / lam))
    lo, hi = min(ratios), max(ratios)
    verdict(4, misses == 0 and 0.3 <= lo and hi <= 1.2,
            f"{25 - misses}/25 within 3 CI, band [{lo:.3f}, {hi:.3f}]")


def test_criterion_05_eigenfunction(verdict):
    lam = [0.1, 1.0, 10.0]
    closed = check_theta_properties(exact_stable(0.5), caputo(0.5),
                                    np.geomspace(0.01, 10.0, 12), lam)
    mc = check_theta_properties(exact_stable(0.5, seed=5), caputo(0.5),
                                np.geomspace(0.01, 10.0, 5), lam, n=200_000, source="mc")
    res = closed.details["max_residual"]
    ok = res < 1e-3 and mc.details["residual_ok"] is True
    verdict(5, ok, f"closed-form residual {res:.2e}; MC residual "
                   f"{mc.details['max_residual']:.2e} (half width "
                   f"{mc.details['max_residual_width']:.2e})")


def test_criterion_06_sonine(verdict):
    closed = varkappa_and_sonine_check(None, caputo(0.5), np.geomspace(0.01, 10.0, 20))
    mc = varkappa_and_sonine_check(exact_stable(0.5, seed=8), caputo(0.5), [0.1, 1.0, 5.0],
                                   n=20_000, source="mc")
    dev = max(closed.details["deviation"])
    verdict(6, dev < 1e-3 and mc.details["sonine_ok"],
            f"closed-form deviation {dev:.2e}; MC deviation "
            f"{max(mc.details['deviation']):.2e} within CI: {mc.details['sonine_ok']}")


def test_criterion_07_dyadic_vs_integral(verdict):
    c = I.SequenceCouple(math.inf, 0.0, math.inf, -1.0, 40)
    sqrt = power(0.5)
    integral = I.phi_norm_integral(c, sqrt, 1, c.unit(0))
    dyadic = I.dyadic_norm(c, sqrt, 1, c.unit(0), J=40)
    ratio = dyadic / integral
    ok = (abs(integral - 4.0) < 1e-6 and abs(dyadic - (3 + 2 * math.sqrt(2))) < 1e-6
          and 0.5 <= ratio <= 2 * math.sqrt(2))
    verdict(7, ok, f"integral {integral:.9f}, dyadic {dyadic:.9f}, ratio {ratio:.4f}")


def test_criterion_08_sequence_identity(verdict):
    rep = I.sequence_identity_check(power(0.5), 2.0, 0.0, -1.0, n_vectors=100)
    band, drift = rep.details["band_width"], rep.refinement_delta
    verdict(8, rep.passed and band < 50 and drift < 0.05,
            f"band max/min {band:.3f}, J-doubling drift {drift:.2e}")


def test_criterion_09_two_weight_hardy(verdict):
    pair = W.trace_pair(W.power_weight(0.0, 2.0))
    res = W.hardy_constants(pair, 2.0)
    variation = res.r_variation(1e-4, 1e4)
    emp = W.hardy_empirical(pair, 2.0, trials=200, seed=3)
    ok = (variation < 0.01 and abs(res.B - 1.0) < 1e-3
          and emp["C_emp"] <= emp["bound"])
    verdict(9, ok, f"B {res.B:.6f}, r-variation {variation:.2e}, "
                   f"C_emp {emp['C_emp']:.4f} <= c(p)B {emp['bound']:.4f}")


def test_criterion_10_round_trip_battery(verdict, tmp_path):
    start = time.perf_counter()
    outs = []
    for jobs, name in ((1, "a.csv"), (1, "b.csv"), (2, "c.csv")):
        out = tmp_path / name
        cli.run_command(["roundtrip", "--config", BATTERY, "--jobs", str(jobs),
                         "--out", str(out)])
        outs.append(out.read_bytes())
    elapsed = time.perf_counter() - start
    rep = cli.load_report(str(tmp_path / "a.csv"))
    ratios = np.array([[r["ext_ratio"], r["trace_ratio"]] for r in rep["rows"]]).ravel()
    band = float(ratios.max() / ratios.min())
    base = json.loads(BASELINE.read_text())
    drift = abs(band / base["band"] - 1.0)
    ok = (len(rep["rows"]) == 22 and bool(np.all(np.isfinite(ratios))) and band < 100
          and outs[0] == outs[1] == outs[2] and drift <= base["tolerance"] and elapsed < 600)
    verdict(10, ok, f"22 cases, band {band:.4f} (baseline {base['band']:.4f}, drift "
                    f"{drift:.1%}), byte-stable {outs[0] == outs[1] == outs[2]}, "
                    f"{elapsed:.1f} s for three runs")


def test_criterion_11_extensions(verdict):
    kernel_err = 0.0
    for alpha in (0.3, 0.5, 0.7):
        for T in (1.0, 2.0):
            k = caputo(alpha)
            ext = extend_kernel(replace(k, T_horizon=T))
            t = np.geomspace(T, 1e4 * T, 41)
            kernel_err = max(kernel_err, float(np.max(np.abs(ext(t) / k(t) - 1.0))))
    slope_err, in_ap = 0.0, True
    for g in (-0.5, 0.0, 0.5):
        for eps in (0.05, 0.1, 0.3):
            ext = W.extend_weight(W.power_weight(g, 2.0), eps, T=1.0)
            for side in (ext, lambda t, e=ext: e(-t)):
                slope_err = max(slope_err, abs(W.fit_tail_slope(side, 1e4, 1e7) + 1 - eps))
            in_ap = in_ap and W.ap_constant(ext).in_ap
    verdict(11, kernel_err < 1e-8 and slope_err < 0.05 and in_ap,
            f"kernel error {kernel_err:.2e}, slope error {slope_err:.3f}, all in A_p {in_ap}")


@pytest.mark.parametrize("alpha, gamma_", [(0.5, -0.5), (0.75, 0.0)])
def test_criterion_12_besov_exponent(verdict, alpha, gamma_):
    q = 2.0
    B = I.BesovCouple(2, 2.0, 0.0, 256)
    w = W.power_weight(gamma_, q)
    kernel = caputo(alpha)
    phi = V.interpolation_parameter(w, q, kernel)
    s = 2.0 - 2.0 * (1 + gamma_) / (q * alpha)
    norm_ratio, trace_ratio = [], []
    for k in range(2, 7):
        f = B.mode(2 ** k)
        norm_ratio.append(I.besov_norm(B, q, f, phi=phi) / I.besov_norm(B, q, f, s=s))
        ext = V.construct_extension(f, B, w, q, "nonlocal", kernel)
        trace_ratio.append(V.trace_bound(ext, w, q, kernel).bound / 2.0 ** (k * s))
    spread = max(max(norm_ratio) / min(norm_ratio), max(trace_ratio) / min(trace_ratio))
    verdict(12, spread < 4,
            f"(alpha, gamma, q) = ({alpha}, {gamma_}, {q}), exponent {s:.3f}, "
            f"largest spread over k = 2..6 {spread:.3f}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
