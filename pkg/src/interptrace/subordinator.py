"""Subordinators driven by a kernel, and Monte Carlo checks built on them.

A kernel κ determines a subordinator S with ``E[e^{-λ S_r}] = e^{-r φ(λ)}``
whose Lévy tail is ``μ((s, ∞)) = κ(s)``.  Two samplers are provided.

``exact_stable(α)``
    Exact draws of ``S_r = r^{1/α} S_1`` for ``φ(λ) = λ^α`` using the
    angle/exponential representation of the one-sided stable law.
``compound_poisson(κ, δ)``
    Jumps larger than the cutoff δ arrive at rate ``κ(δ)`` with tail
    ``κ(x)/κ(δ)``; smaller jumps are replaced by their mean drift
    ``b_δ = ∫₀^δ t μ(dt) = K(δ) − δ κ(δ)``.

The derived quantities are the survival probability ``P(S_r ≥ t)``, the
relaxation function ``Θ(t, λ) = P(S_R ≥ t)`` with ``R ~ Exp(λ)``, and the
resolvent ``ϰ(t) = ∫₀^∞ P(S_r ≤ t) dr``, which is the mean first passage
time of S above level t.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import erf, erfcx, gamma as gamma_fn

from .errors import BudgetError, CutoffError, ParameterError, PreconditionError, TruncationError
from .kernel import KernelSpec, caputo, first_moment, generalized_inverse, laplace_phi, primitive
from .product import graded_grid, product_endpoint, stieltjes_endpoint, trapezoid_coefficients
from .reports import EquivalenceReport, MCEstimate
from .streams import DEFAULT_BLOCK, mc_estimate, run_blocks

__all__ = [
    "SubordinatorModel",
    "exact_stable",
    "compound_poisson",
    "cutoff_for_intensity",
    "sample_stable_increment",
    "sample_path_general",
    "sample",
    "laplace_check",
    "survival_probability",
    "survival_closed_form",
    "theta",
    "theta_curve",
    "theta_closed_form",
    "first_passage_times",
    "varkappa",
    "check_theta_properties",
    "varkappa_and_sonine_check",
    "check_flat_increments",
    "cutoff_richardson",
]

MIN_SAMPLES = 100


@dataclass(frozen=True)
class SubordinatorModel:
    """A subordinator together with its sampling strategy.

    Attributes
    ----------
    kernel : KernelSpec
        The kernel whose Bernstein function is the Laplace exponent.
    strategy : str
        ``"exact_stable"`` or ``"compound_poisson"``.
    alpha : float or None
        Stability index for ``exact_stable``.
    delta : float or None
        Jump cutoff for ``compound_poisson``.
    seed : int
        Master seed of every random stream drawn for this model.
    block_size : int
        Samples per independently seeded block.
    """

    kernel: KernelSpec
    strategy: str
    alpha: float = None
    delta: float = None
    seed: int = 42
    block_size: int = DEFAULT_BLOCK
    drift: float = field(default=0.0)
    intensity: float = field(default=0.0)

    def phi(self, lam):
        """Laplace exponent ``φ(λ)``."""
        return laplace_phi(self.kernel, lam)

    @property
    def is_half_stable(self):
        return self.strategy == "exact_stable" and self.alpha == 0.5

    def with_seed(self, seed):
        """Same model with another master seed."""
        return SubordinatorModel(self.kernel, self.strategy, self.alpha, self.delta,
                                 int(seed), self.block_size, self.drift, self.intensity)

    def tag(self):
        if self.strategy == "exact_stable":
            return f"stable:{self.alpha!r}"
        return f"cp:{self.kernel.family}:{self.delta!r}"


def exact_stable(alpha, seed=42, block_size=DEFAULT_BLOCK):
    """α-stable subordinator with ``φ(λ) = λ^α`` sampled exactly."""
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"stability index must lie strictly in (0, 1), got {alpha}")
    return SubordinatorModel(caputo(alpha), "exact_stable", alpha=alpha,
                             seed=int(seed), block_size=int(block_size))


def compound_poisson(kernel, delta, seed=42, block_size=DEFAULT_BLOCK):
    """Compound Poisson approximation with jump cutoff δ.

    Raises
    ------
    CutoffError
        If ``κ(δ) = 0``, so that no jumps remain above the cutoff.
    """
    delta = float(delta)
    if not delta > 0:
        raise ParameterError(f"cutoff must be positive, got {delta}")
    intensity = float(kernel(delta))
    if not intensity > 0:
        raise CutoffError(f"κ({delta:g}) = 0: the cutoff removes every jump")
    drift = float(primitive(kernel, delta)) - delta * intensity
    alpha = kernel.alpha if kernel.family == "caputo" else None
    return SubordinatorModel(kernel, "compound_poisson", alpha=alpha, delta=delta,
                             seed=int(seed), block_size=int(block_size),
                             drift=max(drift, 0.0), intensity=intensity)


def cutoff_for_intensity(kernel, intensity):
    """Cutoff δ with ``κ(δ) = intensity``."""
    return float(generalized_inverse(kernel, float(intensity), method="exact"))


# ---------------------------------------------------------------------------
# samplers


def _stable_unit(alpha, rng, size):
    """Draws of ``S_1`` with ``E[e^{-λ S_1}] = e^{-λ^α}``."""
    u = rng.uniform(0.0, math.pi, size)
    e = rng.standard_exponential(size)
    log_a = (alpha * np.log(np.sin(alpha * u))
             + (1.0 - alpha) * np.log(np.sin((1.0 - alpha) * u))
             - np.log(np.sin(u))) / (1.0 - alpha)
    return np.exp((1.0 - alpha) / alpha * (log_a - np.log(e)))


_TABLE_PER_DECADE = 128
_REFINE_STEPS = 14
_jump_tables = {}


def _jump_table(model):
    """Log-spaced nodes on ``[δ, t_hi]`` with κ at each node, cached per model."""
    k = model.kernel
    t_hi = k.grid.t_max if k.T_horizon is None else min(k.grid.t_max, k.T_horizon)
    key = (id(k), model.delta, t_hi)
    hit = _jump_tables.get(key)
    if hit is not None and hit[0] is k:
        return hit[1], hit[2]
    decades = max(math.log10(t_hi / model.delta), 1e-9)
    nodes = np.geomspace(model.delta, t_hi, int(math.ceil(decades * _TABLE_PER_DECADE)) + 1)
    values = np.asarray(k(nodes), dtype=float)
    _jump_tables[key] = (k, nodes, values)
    return nodes, values


def _jump_sizes(model, v):
    """Inverse transform of the normalized tail ``κ(x)/κ(δ)``.

    Without a closed-form inverse the node table brackets each draw in one
    cell.  Sums of powers are strictly decreasing and smooth, so linear
    interpolation of ``log x`` against ``log κ`` inside the cell is accurate
    to the square of the cell width.  Other kernels may jump, so a fixed
    number of bisection steps in ``log x`` finishes them, giving a relative
    resolution of the cell width over ``2**_REFINE_STEPS``.
    """
    k = model.kernel
    lam = v * model.intensity
    if "inverse" in k.exact:
        return np.asarray(k.exact["inverse"](lam), dtype=float)
    nodes, values = _jump_table(model)
    # jumps beyond the tabulation range are clamped to its right end
    lam = np.maximum(lam, values[-1])
    if k.family == "sum_of_powers":
        return np.exp(np.interp(-np.log(lam), -np.log(values), np.log(nodes)))
    # first node with κ(node) <= λ; κ is nonincreasing so -values is sorted
    i = np.searchsorted(-values, -lam, side="left")
    i = np.clip(i, 0, nodes.size - 1)
    hi = np.log(nodes[i])
    lo = np.log(nodes[np.maximum(i - 1, 0)])
    for _ in range(_REFINE_STEPS):
        mid = 0.5 * (lo + hi)
        below = k(np.exp(mid)) <= lam
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
    return np.exp(hi)


def _cp_values(model, r, rng):
    """Compound Poisson values at times ``r`` (one path per entry)."""
    r = np.asarray(r, dtype=float)
    counts = rng.poisson(model.intensity * r)
    total = int(counts.sum())
    out = model.drift * r
    if total:
        v = 1.0 - rng.random(total)  # uniform on (0, 1]
        jumps = _jump_sizes(model, v)
        idx = np.repeat(np.arange(r.size), counts)
        out = out + np.bincount(idx, weights=jumps, minlength=r.size)
    return out


def _values_at(model, r, rng):
    """``S_{r_i}`` for independent paths, one per entry of ``r``."""
    r = np.asarray(r, dtype=float)
    if model.strategy == "exact_stable":
        return np.power(r, 1.0 / model.alpha) * _stable_unit(model.alpha, rng, r.size)
    return _cp_values(model, r, rng)


def sample_stable_increment(alpha, r, n, seed=42, jobs=1, task="stable"):
    """``n`` independent draws of ``S_r`` for the α-stable subordinator.

    Parameters
    ----------
    alpha : float
        Stability index in (0, 1).
    r : float
        Time, ``r > 0``.
    n : int
        Number of samples.

    Returns
    -------
    ndarray
        Positive samples with ``E[e^{-λ S_r}] = e^{-r λ^α}``.
    """
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"stability index must lie strictly in (0, 1), got {alpha}")
    if not r > 0:
        raise ParameterError(f"r must be positive, got {r}")
    if int(n) < 1:
        raise ParameterError("need at least one sample")
    scale = float(r) ** (1.0 / alpha)
    fn = lambda rng, size, off: scale * _stable_unit(alpha, rng, size)
    return run_blocks(fn, n, seed, (task, alpha, float(r)).__repr__(), jobs)


def sample_path_general(model, r, n, jobs=1, task="cp"):
    """``n`` draws of ``S_r`` from the compound Poisson approximation.

    Each sample is ``b_δ r`` plus a Poisson(``κ(δ) r``) number of jumps with
    tail ``κ(x)/κ(δ)`` on ``(δ, ∞)``.  ``r = 0`` yields zeros.
    """
    if model.strategy != "compound_poisson":
        raise PreconditionError("sample_path_general needs a compound_poisson model")
    r = float(r)
    if r < 0:
        raise ParameterError(f"r must be nonnegative, got {r}")
    if r == 0:
        return np.zeros(int(n))
    fn = lambda rng, size, off: _cp_values(model, np.full(size, r), rng)
    return run_blocks(fn, n, model.seed, (task, model.tag(), r).__repr__(), jobs,
                      model.block_size)


def sample(model, r, n, jobs=1, task="S"):
    """Draws of ``S_r`` with whichever strategy the model carries."""
    if model.strategy == "exact_stable":
        return sample_stable_increment(model.alpha, r, n, model.seed, jobs, task)
    return sample_path_general(model, r, n, jobs, task)


def laplace_check(model, r, lam, n=100_000, jobs=1):
    """Compare ``mean(e^{-λ S_r})`` with ``e^{-r φ(λ)}``.

    Returns
    -------
    (MCEstimate, float)
        The estimate and the exact value.
    """
    s = sample(model, r, n, jobs, task=("laplace", float(lam)).__repr__())
    est = mc_estimate(np.exp(-float(lam) * s))
    return est, math.exp(-float(r) * float(model.phi(float(lam))))


# ---------------------------------------------------------------------------
# survival probability and Θ


def _budget(n):
    if int(n) < MIN_SAMPLES:
        raise BudgetError(f"at least {MIN_SAMPLES} samples are required, got {n}")


def survival_closed_form(r, t):
    """``P(S_r ≥ t) = erf(r/(2√t))`` for ``φ(λ) = √λ``."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(t > 0, erf(r / (2.0 * np.sqrt(t))), 1.0)


def survival_probability(model, r, t, n=100_000, jobs=1, analytic=False):
    """Monte Carlo estimate of ``P(S_r ≥ t)``.

    With ``analytic=True`` and the exact ½-stable model the closed form is
    returned with zero width.
    """
    _budget(n)
    if not (r > 0 and t > 0):
        raise ParameterError("r and t must be positive")
    if analytic:
        if not model.is_half_stable:
            raise PreconditionError("the closed form needs the exact ½-stable model")
        return MCEstimate(float(survival_closed_form(r, t)), 0.0, int(n))
    s = sample(model, r, n, jobs, task="survival")
    return mc_estimate(s >= float(t))


def theta_closed_form(t, lam):
    """``Θ(t, λ) = e^{λ² t} erfc(λ √t)`` for ``φ(λ) = √λ``."""
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    return erfcx(lam * np.sqrt(t))


def _theta_samples(model, lam, n, jobs, task):
    lam = float(lam)

    def fn(rng, size, off):
        r = rng.exponential(1.0 / lam, size)
        return _values_at(model, r, rng)

    return run_blocks(fn, n, model.seed, (task, model.tag(), lam).__repr__(), jobs,
                      model.block_size)


def theta(model, t, lam, n=100_000, jobs=1):
    """Monte Carlo estimate of ``Θ(t, λ)``.

    ``R ~ Exp(λ)`` is drawn first and then the indicator ``{S_R ≥ t}``.
    ``Θ(0, λ) = 1`` is returned exactly.
    """
    _budget(n)
    if not lam > 0:
        raise ParameterError("λ must be positive")
    if t < 0:
        raise ParameterError("t must be nonnegative")
    if t == 0:
        return MCEstimate(1.0, 0.0, int(n))
    s = _theta_samples(model, lam, n, jobs, "theta")
    return mc_estimate(s >= float(t))


def theta_curve(model, t_grid, lam, n=100_000, jobs=1):
    """Θ on a whole t grid from one set of samples.

    Returns
    -------
    (ndarray, ndarray, ndarray)
        Values, 95% half widths and the sorted samples ``S_R``.
    """
    _budget(n)
    t_grid = np.asarray(t_grid, dtype=float)
    s = np.sort(_theta_samples(model, lam, n, jobs, "theta"))
    p = 1.0 - np.searchsorted(s, t_grid, side="left") / s.size
    p = np.where(t_grid == 0, 1.0, p)
    hw = 1.96 * np.sqrt(p * (1.0 - p) / max(s.size - 1, 1))
    return p, hw, s


# ---------------------------------------------------------------------------
# first passage times and the resolvent


def first_passage_times(model, levels, n=20_000, jobs=1, max_rounds=200_000):
    """Per-path first passage times ``E(s) = inf{r : S_r > s}``.

    Parameters
    ----------
    levels : array_like
        Nondecreasing nonnegative levels.

    Returns
    -------
    ndarray
        Shape ``(n, len(levels))``.

    Raises
    ------
    TruncationError
        If some compound Poisson path does not pass the top level within
        ``max_rounds`` jumps.
    """
    levels = np.asarray(levels, dtype=float)
    if model.strategy == "exact_stable":
        a = model.alpha

        def fn(rng, size, off):
            s1 = _stable_unit(a, rng, size)
            return np.power(levels[None, :] / s1[:, None], a)

        return run_blocks(fn, n, model.seed, ("passage", model.tag()).__repr__(), jobs,
                          model.block_size)
    top = float(levels.max())

    def fn(rng, size, off):
        return _cp_passage(model, levels, top, rng, size, max_rounds)

    return run_blocks(fn, n, model.seed, ("passage", model.tag()).__repr__(), jobs,
                      model.block_size)


def _cp_passage(model, levels, top, rng, size, max_rounds):
    b, rate = model.drift, model.intensity
    r = np.zeros(size)
    x = np.zeros(size)
    active = np.arange(size)
    seg_path, seg_r, seg_x, seg_tau, seg_end = [], [], [], [], []
    for _ in range(max_rounds):
        if active.size == 0:
            break
        tau = rng.exponential(1.0 / rate, active.size)
        jump = _jump_sizes(model, 1.0 - rng.random(active.size))
        ra, xa = r[active], x[active]
        end = xa + b * tau + jump
        seg_path.append(active)
        seg_r.append(ra)
        seg_x.append(xa)
        seg_tau.append(tau)
        seg_end.append(end)
        r[active] = ra + tau
        x[active] = end
        active = active[end <= top]
    else:
        raise TruncationError(
            f"{active.size} paths stayed below level {top:g} after {max_rounds} jumps")
    path = np.concatenate(seg_path)
    order = np.lexsort((np.concatenate(seg_r), path))
    path = path[order]
    r0 = np.concatenate(seg_r)[order]
    x0 = np.concatenate(seg_x)[order]
    tau = np.concatenate(seg_tau)[order]
    # the position after each segment, capped so keys increase along paths
    end = np.minimum(np.concatenate(seg_end)[order], top + 1.0)
    span = top + 2.0
    keys = path * span + end
    q = (np.arange(size)[:, None] * span + levels[None, :]).ravel()
    k = np.searchsorted(keys, q, side="right").reshape(size, levels.size)
    rs, xs, ts = r0[k], x0[k], tau[k]
    lv = levels[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        drift_hit = np.where(b > 0, rs + (lv - xs) / b, np.inf)
    return np.where(xs + b * ts > lv, np.minimum(drift_hit, rs + ts), rs + ts)


def varkappa(model, t, n=20_000, jobs=1):
    """Monte Carlo ``ϰ(t)`` as the mean first passage time above t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    e = first_passage_times(model, t, n, jobs)
    return [mc_estimate(e[:, i]) for i in range(t.size)]


# ---------------------------------------------------------------------------
# checks


def _phi_at(model, x):
    return np.asarray(model.phi(np.asarray(x, dtype=float)), dtype=float)


def check_theta_properties(model, kappa, t_grid, lam_grid, n=100_000, source="closed_form",
                           tol=1e-3, M=256, jobs=1, band=(0.3, 1.2), inconclusive_width=0.05):
    """Eigenfunction identity, equivalence band and tail bounds of Θ.

    (a) On a cosine-graded grid on ``[0, t]`` the quantity
    ``I = ∫₀^t κ(t−s)(Θ(s,λ) − 1) ds`` is formed by product integration and
    compared with ``−λ ∫₀^t Θ(s,λ) ds``.  For Monte Carlo Θ the residual is
    linear in the per-sample indicators, so its 95% half width ``u`` is
    exact; a point passes when ``|res| ≤ tol + 3u`` and the run is
    inconclusive when ``u`` exceeds ``inconclusive_width``.

    (b) ``Θ(t,λ) / (1 ∧ φ(1/t)/λ)`` over the grid.

    (c) ``c₂ = min −log(1 − P(S_r ≥ t)) / (r φ(1/t))`` is fitted over
    ``r φ(1/t) ∈ [1e-3, 5]`` (with the lower confidence limit of P for
    Monte Carlo), the band ``c_{1,L} ≤ P/(r φ(1/t)) ≤ c_{2,L}`` is recorded
    for ``r φ(1/t) ≤ 1``, and ``Θ ≥ 1 − λ/(λ + c₂ φ(1/t))`` is checked.

    Parameters
    ----------
    source : {"closed_form", "mc"}
        Where Θ comes from; the closed form needs the ½-stable model.
    """
    if source not in ("closed_form", "mc"):
        raise ParameterError(f"unknown source {source!r}")
    if source == "closed_form" and not (model.alpha == 0.5 and kappa.family == "caputo"
                                        and kappa.alpha == 0.5):
        raise PreconditionError("closed-form Θ needs φ(λ) = √λ")
    if source == "mc" and model.kernel.family == kappa.family:
        if model.kernel.params != kappa.params:
            raise PreconditionError("model and kernel must share the same φ")
    t_grid = np.asarray(t_grid, dtype=float)
    lam_grid = np.asarray(lam_grid, dtype=float)
    P = lambda u: primitive(kappa, u)
    Mo = lambda u: first_moment(kappa, u)
    residuals = np.zeros((lam_grid.size, t_grid.size))
    widths = np.zeros_like(residuals)
    ratios = np.zeros_like(residuals)
    th_grid = np.zeros_like(residuals)
    for a, lam in enumerate(lam_grid):
        sorted_s = None
        if source == "mc":
            _, _, sorted_s = theta_curve(model, [0.0], lam, n, jobs)
        for b, t in enumerate(t_grid):
            if t == 0:
                th_grid[a, b] = 1.0
                continue
            s = graded_grid(t, M)
            w = trapezoid_coefficients(s)
            _, coef = product_endpoint(P, Mo, s, np.zeros(s.size))
            total = float(P(t))
            if source == "closed_form":
                th = theta_closed_form(s, lam)
                lhs = float(coef @ th) - total
                rhs = -lam * float(w @ th)
                residuals[a, b] = abs(lhs - rhs) / abs(rhs)
                th_grid[a, b] = float(theta_closed_form(t, lam))
            else:
                # sample i contributes g_j = 1{s_j ≤ S_i}; its residual is a
                # prefix sum of the combined coefficients
                c = np.cumsum(coef + lam * w)
                k = np.searchsorted(s, sorted_s, side="right")
                per = np.where(k > 0, c[np.maximum(k - 1, 0)], 0.0) - total
                est = mc_estimate(per)
                denom_s = np.where(k > 0, np.cumsum(w)[np.maximum(k - 1, 0)], 0.0)
                denom = lam * float(np.mean(denom_s))
                residuals[a, b] = abs(est.value) / denom
                widths[a, b] = est.half_width_95 / denom
                th_grid[a, b] = 1.0 - np.searchsorted(sorted_s, t, side="left") / sorted_s.size
            ref = min(1.0, float(_phi_at(model, 1.0 / t)) / lam)
            ratios[a, b] = th_grid[a, b] / ref
    pos = t_grid > 0
    res = residuals[:, pos]
    wid = widths[:, pos]
    rat = ratios[:, pos]
    if source == "mc" and np.max(wid) > inconclusive_width:
        res_ok = None
    else:
        res_ok = bool(np.all(res <= tol + 3.0 * wid))
    # (c) survival tail constants on the same t grid, r ∈ {0.1, 1, 10}/φ(1/t)
    c2, c1L, c2L, lower_ok = _tail_constants(model, t_grid[pos], th_grid[:, pos], lam_grid,
                                             n, source, jobs)
    band_ok = bool(rat.min() >= band[0] and rat.max() <= band[1])
    status = "inconclusive" if res_ok is None else ""
    rep = EquivalenceReport.from_ratios(
        rat.ravel(), refinement_delta=0.0, extra_ok=bool(res_ok) and band_ok and lower_ok,
        details={
            "max_residual": float(res.max()),
            "max_residual_width": float(wid.max()),
            "residual_ok": res_ok,
            "band": [float(rat.min()), float(rat.max())],
            "band_ok": band_ok,
            "c2": c2, "c1L": c1L, "c2L": c2L,
            "theta_lower_bound_ok": lower_ok,
        })
    if status:
        rep = EquivalenceReport(rep.ratio_min, rep.ratio_max, rep.ratio_median, False,
                                rep.refinement_delta, status, rep.details)
    return rep


def _tail_constants(model, t_pos, th, lam_grid, n, source, jobs):
    ph = _phi_at(model, 1.0 / t_pos)
    c2 = math.inf
    low_ratio, high_ratio = math.inf, 0.0
    for mult in (1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0):
        for t, f in zip(t_pos, ph):
            r = mult / f
            if source == "closed_form":
                p = p_low = float(survival_closed_form(r, t))
            else:
                est = survival_probability(model, r, t, max(n // 10, MIN_SAMPLES), jobs)
                p, p_low = est.value, max(est.value - est.half_width_95, 0.0)
            if p_low > 0.0 and p_low < 1.0:
                c2 = min(c2, -math.log1p(-p_low) / mult)
            if mult <= 1.0:
                low_ratio = min(low_ratio, p / mult)
                high_ratio = max(high_ratio, p / mult)
    if not math.isfinite(c2) or c2 <= 0:
        return c2, low_ratio, high_ratio, False
    lam = np.asarray(lam_grid, dtype=float)[:, None]
    bound = 1.0 - lam / (lam + c2 * ph[None, :])
    slack = 0.0 if source == "closed_form" else 3.0 * np.sqrt(0.25 / n)
    return c2, low_ratio, high_ratio, bool(np.all(th >= bound - 1e-12 - slack))


def varkappa_and_sonine_check(model, kappa, t_grid, n=20_000, source="closed_form", M=256,
                              tol=1e-3, jobs=1):
    """Resolvent ϰ and the Sonine identity ``∫₀^t κ(t−s) ϰ(ds) = 1``.

    ϰ is taken piecewise linear on a cosine-graded grid and the Stieltjes
    integral is formed panel by panel with the exact mean of κ on each
    panel.  The companion identity ``∫₀^t κ(t−s) ϰ(s) ds = t`` is checked by
    product integration.  With ``source="mc"`` each sample path gives its
    own Stieltjes sum through its first passage times, so the deviation
    carries a 95% half width and passes when it is within ``tol + 3u``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0):
        raise ParameterError("t grid must be positive")
    if source not in ("closed_form", "mc"):
        raise ParameterError(f"unknown source {source!r}")
    P = lambda u: primitive(kappa, u)
    Mo = lambda u: first_moment(kappa, u)
    dev, dev2, widths, kap = [], [], [], []
    for t in t_grid:
        s = graded_grid(t, M)
        if source == "closed_form":
            if "resolvent" not in kappa.exact:
                raise PreconditionError("no closed-form resolvent for this kernel")
            F = np.asarray(kappa.exact["resolvent"](s), dtype=float)
            v, _ = stieltjes_endpoint(P, s, F)
            u, _ = product_endpoint(P, Mo, s, F)
            dev.append(abs(float(v) - 1.0))
            dev2.append(abs(float(u) - t) / t)
            widths.append(0.0)
            kap.append(float(F[-1]))
        else:
            E = first_passage_times(model, s, n, jobs)
            _, c = stieltjes_endpoint(P, s, np.zeros(s.size))
            est = mc_estimate(np.diff(E, axis=1) @ c)
            u_val, _ = product_endpoint(P, Mo, s, E.mean(axis=0))
            dev.append(abs(est.value - 1.0))
            dev2.append(abs(float(u_val) - t) / t)
            widths.append(est.half_width_95)
            kap.append(float(E[:, -1].mean()))
    dev = np.array(dev)
    widths = np.array(widths)
    ok = bool(np.all(dev <= tol + 3.0 * widths))
    ok2 = bool(np.all(np.array(dev2) <= tol + 3.0 * widths))
    ratios = 1.0 + dev
    return EquivalenceReport.from_ratios(
        ratios, refinement_delta=0.0, threshold=1.0, extra_ok=ok and ok2,
        details={
            "t": t_grid.tolist(),
            "deviation": dev.tolist(),
            "half_width": widths.tolist(),
            "integral_deviation": list(map(float, dev2)),
            "varkappa": kap,
            "sonine_ok": ok,
            "integral_ok": ok2,
        })


def check_flat_increments(model, n=100_000, dr=1e-3, jobs=1):
    """Fraction of exactly flat increments over ``dr``.

    Exact stable paths are strictly increasing, so the fraction must stay
    below 1e-3.  A compound Poisson path moves by its drift alone when no
    jump occurs; the fraction of such increments is compared with the gap
    probability ``e^{−κ(δ) dr}``.
    """
    if model.strategy == "exact_stable":
        inc = sample(model, dr, n, jobs, task="flat")
        est = mc_estimate(inc == 0.0)
        return {"fraction": est.value, "expected": 0.0, "half_width": est.half_width_95,
                "passed": est.value < 1e-3}

    def fn(rng, size, off):
        return rng.poisson(model.intensity * dr, size) == 0

    est = mc_estimate(run_blocks(fn, n, model.seed, ("flat", model.tag()).__repr__(), jobs,
                                 model.block_size))
    expected = math.exp(-model.intensity * dr)
    return {"fraction": est.value, "expected": expected, "half_width": est.half_width_95,
            "passed": abs(est.value - expected) <= 3.0 * est.half_width_95 + 1e-12}


def cutoff_richardson(kernel, r, t, deltas=(1e-3, 1e-4), n=100_000, seed=42, jobs=1):
    """Survival estimates at two cutoffs and the modelled bias bound.

    The bias bound ``2 δ^{1−α} r / Γ(1−α)`` is used for Caputo kernels;
    otherwise the drift ``b_δ r`` serves as bound.
    """
    out = []
    for d in deltas:
        m = compound_poisson(kernel, d, seed)
        est = survival_probability(m, r, t, n, jobs)
        if kernel.family == "caputo":
            a = kernel.alpha
            bias = 2.0 * d ** (1.0 - a) * r / gamma_fn(1.0 - a)
        else:
            bias = m.drift * r
        out.append({"delta": d, "estimate": est, "bias_bound": bias})
    change = abs(out[0]["estimate"].value - out[1]["estimate"].value)
    ci = out[0]["estimate"].half_width_95 + out[1]["estimate"].half_width_95
    return {"runs": out, "change": change,
            "passed": change <= max(o["bias_bound"] for o in out) + 3.0 * ci}
