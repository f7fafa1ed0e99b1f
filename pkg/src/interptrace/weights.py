"""Muckenhoupt weights, maximal functions and two-weight Hardy constants.

A weight is a nonnegative locally integrable function on ℝ.  For ``p > 1``
its A_p characteristic is the supremum over intervals of

    (1/|I| ∫_I w) (1/|I| ∫_I w^{-1/(p-1)})^{p-1},

which is estimated from below over a dyadic family of intervals.  The
primitive ``W(t) = ∫₀^t w`` feeds the interpolation parameter ``W^{1/p}``.

Two-weight Hardy inequalities ``‖F U‖_p ≤ C ‖f V‖_p`` with ``F`` the
running integral of f from 0 (or from ∞) hold exactly when

    B₀ = sup_r ‖U‖_{L_p((r,∞))} ‖1/V‖_{L_{p'}((0,r))}   (from 0),
    B∞ = sup_r ‖U‖_{L_p((0,r))} ‖1/V‖_{L_{p'}((r,∞))}   (from ∞)

is finite, and then ``C ≤ c(p) B`` with ``c(p) = p^{1/p} p'^{1/p'}``.
"""

from dataclasses import dataclass, field
import csv
import math

import numpy as np

from . import core
from .errors import (DivergenceError, EvaluationError, ParameterError, PreconditionError,
                     UnsupportedError)
from .gridfunc import GridFunction
from .quadrature import GL16, integrate_dt
from .scaling import GridSpec, ScalingFunction, fit_membership

__all__ = [
    "WeightSpec",
    "power_weight",
    "tabulated_weight",
    "product_weight",
    "load_weight_csv",
    "interval_integral",
    "ApResult",
    "ap_constant",
    "cumulative_W",
    "scaling_check",
    "maximal_function",
    "maximal_values",
    "smoothed_average_ratio",
    "HardyPair",
    "HardyResult",
    "trace_pair",
    "extension_pairs",
    "hardy_constants",
    "hardy_empirical",
    "hardy_c",
    "extend_weight",
    "fit_tail_slope",
]


def _arr(x):
    return np.asarray(x, dtype=float)


def conjugate(p):
    """Hölder conjugate ``p' = p/(p-1)``."""
    return p / (p - 1.0)


def hardy_c(p):
    """Frozen constant ``c(p) = p^{1/p} p'^{1/p'}`` of the Hardy bound
    ``C ≤ c(p) B``; equals 2 at ``p = 2``."""
    q = conjugate(p)
    return p ** (1.0 / p) * q ** (1.0 / q)


# ---------------------------------------------------------------------------
# weight descriptors


@dataclass(frozen=True)
class WeightSpec:
    """A weight on ℝ with an exponent p.

    Attributes
    ----------
    family : str
        ``"power"``, ``"tabulated"``, ``"product"`` or ``"extended"``.
    params : dict
        Family parameters (JSON friendly where possible).
    evaluator : callable
        Vectorized ``t -> w(t) ≥ 0`` on ℝ.
    p : float
        Exponent in (1, ∞).
    T_horizon : float or None
        Right end of the original domain for weights given on ``(0, T)``.
    breakpoints : tuple
        Points where w may jump or have a singularity.
    prefix : callable or None
        Closed form ``(y, s) -> ∫₀^y w^s`` (signed) when available.
    """

    family: str
    params: dict
    evaluator: object
    p: float = 2.0
    T_horizon: float = None
    breakpoints: tuple = (0.0,)
    prefix: object = None
    _tables: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not (self.p > 1.0):
            raise ParameterError(f"p must lie in (1, ∞), got {self.p}")

    def __call__(self, t):
        return self.evaluator(_arr(t))

    @property
    def gamma(self):
        return self.params.get("gamma") if self.family == "power" else None

    def power_of(self, s):
        """Evaluator of ``w^s`` (with ``0^s = ∞`` for negative s)."""
        ev = self.evaluator

        def f(t):
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                return np.power(ev(_arr(t)), s)

        return f

    def to_json(self):
        if self.family == "power":
            return {"family": "power", "gamma": self.params["gamma"], "p": self.p}
        if self.family == "tabulated":
            return {"family": "tabulated", "t": list(self.params["t"]),
                    "values": list(self.params["values"]), "p": self.p}
        raise UnsupportedError(f"weights of family {self.family!r} are not serializable")

    @classmethod
    def from_json(cls, d):
        fam = d.get("family")
        if fam == "power":
            return power_weight(d["gamma"], d.get("p", 2.0))
        if fam == "tabulated":
            return tabulated_weight(d["t"], d["values"], d.get("p", 2.0))
        raise UnsupportedError(f"unknown weight family {fam!r}")


def _power_prefix(gamma):
    def prefix(y, s):
        y = _arr(y)
        e = gamma * s
        if e <= -1.0:
            raise DivergenceError(
                f"|t|^{e:g} is not integrable at 0", "lower")
        return np.sign(y) * np.power(np.abs(y), 1.0 + e) / (1.0 + e)

    return prefix


def power_weight(gamma, p=2.0):
    """``w(t) = |t|^γ``."""
    gamma = float(gamma)

    def ev(t):
        with np.errstate(divide="ignore"):
            return np.power(np.abs(t), gamma)

    return WeightSpec("power", {"gamma": gamma}, ev, float(p), prefix=_power_prefix(gamma))


def tabulated_weight(t, values, p=2.0):
    """Weight from samples on ``(0, ∞)`` with log-log interpolation.

    The weight is extended evenly to ℝ and held constant beyond the sample
    range.
    """
    t = _arr(t)
    v = _arr(values)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0) or np.any(t <= 0):
        raise ParameterError("tabulated weights need increasing positive abscissae")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ParameterError("tabulated weight values must be positive and finite")
    lt, lv = np.log(t), np.log(v)

    def ev(x):
        ax = np.abs(_arr(x))
        with np.errstate(divide="ignore"):
            return np.exp(np.interp(np.log(ax), lt, lv))

    return WeightSpec("tabulated", {"t": t.tolist(), "values": v.tolist()}, ev, float(p))


def product_weight(w1, w2):
    """Pointwise product; the exponent of ``w1`` is kept."""
    ev = lambda t: w1(t) * w2(t)
    bps = tuple(sorted(set(w1.breakpoints) | set(w2.breakpoints)))
    prefix = None
    if w1.family == "power" and w2.family == "power":
        prefix = _power_prefix(w1.gamma + w2.gamma)
    return WeightSpec("product", {"factors": [w1.family, w2.family]}, ev, w1.p,
                      breakpoints=bps, prefix=prefix)


def load_weight_csv(path, p=2.0):
    """Read a tabulated weight from CSV rows ``t, w(t)``."""
    ts, vs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                ts.append(float(row[0]))
                vs.append(float(row[1]))
            except ValueError:
                continue
    return tabulated_weight(ts, vs, p)


# ---------------------------------------------------------------------------
# primitives


class _PrefixTable:
    """Signed primitive ``P(y) = ∫₀^y f`` of a function on ℝ.

    Nodes are log-spaced on both sides of 0 together with the breakpoints.
    Panels between nodes use 16-point Gauss--Legendre; the two panels
    touching 0 use the log-panel engine, which integrates power
    singularities.  A nonintegrable singularity at 0 is recorded in
    ``diverged``.
    """

    def __init__(self, f, breakpoints=(), lo=1e-10, hi=1e10, ppd=8):
        pos = np.geomspace(lo, hi, int(round(ppd * math.log10(hi / lo))) + 1)
        extra = [b for b in breakpoints if b != 0.0 and abs(b) < hi]
        # nodes just beside breakpoints keep jumps out of the Gauss panels
        nodes = np.unique(np.concatenate([-pos[::-1], [0.0], pos, extra]))
        self.nodes = nodes
        self.f = f
        self.diverged = None
        a, b = nodes[:-1], nodes[1:]
        panels = np.zeros(a.size)
        i0 = int(np.searchsorted(nodes, 0.0))
        inner = np.ones(a.size, dtype=bool)
        inner[[i0 - 1, i0]] = False
        panels[inner] = self._gl(a[inner], b[inner])
        try:
            right = integrate_dt(lambda t: f(t), 0.0, float(nodes[i0 + 1]), rtol=1e-13)
            left = integrate_dt(lambda t: f(-t), 0.0, float(-nodes[i0 - 1]), rtol=1e-13)
        except (DivergenceError, EvaluationError) as exc:
            self.diverged = (float(nodes[i0 - 1]), float(nodes[i0 + 1]), str(exc))
            right = left = np.inf
        panels[i0 - 1] = left
        panels[i0] = right
        # accumulate outward from 0 so small |y| keeps full relative precision
        cum = np.zeros(nodes.size)
        cum[i0 + 1:] = np.cumsum(panels[i0:])
        cum[:i0] = -np.cumsum(panels[:i0][::-1])[::-1]
        self.cum = cum

    def _gl(self, a, b):
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        x = mid[:, None] + half[:, None] * GL16.nodes[None, :]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = _arr(self.f(x.ravel())).reshape(x.shape)
        return np.sum(v * GL16.weights, axis=1) * half

    def __call__(self, y):
        y = _arr(y)
        flat = y.ravel()
        i = np.clip(np.searchsorted(self.nodes, flat, side="right") - 1, 0,
                    self.nodes.size - 2)
        base = self.cum[i]
        partial = self._gl(self.nodes[i], flat)
        out = np.where(flat == self.nodes[i], base, base + partial)
        return out.reshape(y.shape)


def _prefix(w, s):
    """Signed primitive of ``w^s`` (closed form or tabulated and cached)."""
    if w.prefix is not None:
        return lambda y: w.prefix(y, s)
    key = ("prefix", float(s))
    if key not in w._tables:
        tab = _PrefixTable(w.power_of(s), w.breakpoints)
        w._tables[key] = tab
    tab = w._tables[key]
    if tab.diverged is not None:
        def raiser(y):
            raise DivergenceError(
                f"w^{s:g} is not integrable near 0 on ({tab.diverged[0]:.3g}, "
                f"{tab.diverged[1]:.3g})", "lower")
        return raiser
    return tab


def interval_integral(w, a, b, s=1.0):
    """``∫_a^b w^s`` for arrays of endpoints."""
    P = _prefix(w, s)
    return P(_arr(b)) - P(_arr(a))


# ---------------------------------------------------------------------------
# A_p characteristic


@dataclass
class ApResult:
    """Dyadic lower bound of ``[w]_{A_p}``.

    ``in_ap`` is False when an integral diverges on some interval of the
    family; ``witness`` is then that interval, otherwise the maximizing one.
    """

    value: float
    in_ap: bool
    witness: tuple
    n_intervals: int
    p: float

    def to_dict(self):
        return {"value": self.value, "in_ap": self.in_ap, "witness": list(self.witness),
                "n_intervals": self.n_intervals, "p": self.p}


def _dyadic_family(levels, positions, t_max):
    ks = np.arange(-levels, levels + 1)
    js = np.arange(-positions, positions + 1)
    L = np.ldexp(1.0, ks)[:, None]
    a = (js[None, :] * L / 2.0)
    b = a + L
    a, b = a.ravel(), b.ravel()
    keep = (a >= -t_max) & (b <= t_max)
    return a[keep], b[keep]


def ap_constant(w, interval_budget=(20, 8), p=None, t_max=1e8):
    """Supremum of the A_p product over dyadic intervals.

    Intervals are ``[j L/2, j L/2 + L]`` with ``L = 2^k``, ``|k| ≤ levels``
    and ``|j| ≤ positions``.  The families are nested, so the value is
    nondecreasing in both budget entries.

    Parameters
    ----------
    w : WeightSpec
    interval_budget : (int, int)
        ``(levels, positions)``.
    p : float, optional
        Overrides ``w.p``.
    """
    p = float(w.p if p is None else p)
    if not p > 1:
        raise ParameterError(f"p must lie in (1, ∞), got {p}")
    levels, positions = (int(x) for x in interval_budget)
    a, b = _dyadic_family(levels, positions, t_max)
    s_dual = -1.0 / (p - 1.0)
    try:
        I1 = interval_integral(w, a, b, 1.0)
        I2 = interval_integral(w, a, b, s_dual)
    except DivergenceError:
        # locate a witness: the smallest family interval touching 0
        touch = (a <= 0.0) & (b >= 0.0)
        k = int(np.argmin(np.where(touch, b - a, np.inf)))
        return ApResult(math.inf, False, (float(a[k]), float(b[k])), int(a.size), p)
    L = b - a
    with np.errstate(invalid="ignore", over="ignore"):
        prod = (I1 / L) * np.power(I2 / L, p - 1.0)
    bad = ~np.isfinite(prod)
    if np.any(bad):
        k = int(np.argmax(bad))
        return ApResult(math.inf, False, (float(a[k]), float(b[k])), int(a.size), p)
    k = int(np.argmax(prod))
    return ApResult(float(prod[k]), True, (float(a[k]), float(b[k])), int(a.size), p)


# ---------------------------------------------------------------------------
# primitive W and its scaling class


def cumulative_W(w, t):
    """``W(t) = ∫₀^t w`` for ``t > 0``."""
    t = _arr(t)
    if np.any(t <= 0):
        raise ParameterError("W is evaluated at positive t")
    P = _prefix(w, 1.0)
    out = _arr(P(t)) - float(_arr(P(np.array(0.0))))
    return float(out) if out.ndim == 0 else out


def scaling_check(w, K=20, grid=None):
    """Membership of W in ``I_o(0, p)`` via the fitted dilation exponents."""
    phi = ScalingFunction(lambda t: cumulative_W(w, t), (0.0, w.p), grid or GridSpec())
    return fit_membership(phi, K)


# ---------------------------------------------------------------------------
# maximal functions


def _prefix_trapezoid(x, h):
    out = np.zeros_like(x)
    out[1:] = np.cumsum(0.5 * np.diff(x) * (h[1:] + h[:-1]))
    return out


def maximal_values(h):
    """Uncentered maximal function at every grid node.

    h is piecewise linear on its grid and zero outside it; the supremum
    runs over intervals with endpoints at grid nodes together with the
    degenerate interval at the node itself.
    """
    x = h.grid
    a = h.pointwise_norm()
    # shrinking intervals around a node tend to |h| there
    return np.maximum(core.maximal_all(x, _prefix_trapezoid(x, a)), a)


def maximal_function(h, t):
    """Uncentered maximal function of a grid function at points t.

    Query points off the grid are inserted as extra nodes (with the
    interpolated value) before the sweep.
    """
    t = _arr(t)
    flat = t.ravel()
    x = h.grid
    a = h.pointwise_norm()
    missing = np.setdiff1d(flat, x)
    missing = missing[(missing > x[0]) & (missing < x[-1])]
    outside = np.setdiff1d(flat, np.concatenate([x, missing]))
    if missing.size or outside.size:
        new = np.unique(np.concatenate([x, missing, outside]))
        vals = np.interp(new, x, a, left=0.0, right=0.0)
        x, a = new, vals
    m = np.maximum(core.maximal_all(x, _prefix_trapezoid(x, a)), a)
    out = m[np.searchsorted(x, flat)]
    return float(out[0]) if t.ndim == 0 else out.reshape(t.shape)


def smoothed_average_ratio(h, s):
    """Ratios ``g(s) / ℳ(h 1_{ℝ+})(s)`` with ``g(s) = ∫₀^∞ τ e^{-τ} h(sτ) dτ``.

    ``g`` is integrated exactly against the piecewise linear h on its grid
    (Gauss--Legendre per cell); ℳ comes from :func:`maximal_function` on the
    grid restricted to ``[0, ∞)``.
    """
    s = np.atleast_1d(_arr(s))
    x = h.grid
    a = h.pointwise_norm()
    keep = x >= 0
    x, a = x[keep], a[keep]
    if x[0] > 0:
        x = np.concatenate([[0.0], x])
        a = np.concatenate([[0.0], a])
    hp = GridFunction(x, a)
    mx = maximal_function(hp, s)
    xa, xb = x[:-1], x[1:]
    half = 0.5 * (xb - xa)
    mid = 0.5 * (xa + xb)
    u = mid[:, None] + half[:, None] * GL16.nodes[None, :]
    hv = np.interp(u, x, a)
    g = np.empty(s.size)
    for i, si in enumerate(s):
        kern = u / si ** 2 * np.exp(-u / si)
        g[i] = np.sum(np.sum(kern * hv * GL16.weights, axis=1) * half)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(mx > 0, g / mx, 0.0)


# ---------------------------------------------------------------------------
# two-weight Hardy constants


@dataclass(frozen=True)
class HardyPair:
    """Weights U, V on ``ℝ_+`` and the direction of the running integral.

    ``direction`` is ``"from_zero"`` (``F₀(t) = ∫₀^t f``) or
    ``"from_infinity"`` (``F∞(t) = ∫_t^∞ f``).
    """

    U: object
    V: object
    direction: str = "from_zero"
    breakpoints: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.direction not in ("from_zero", "from_infinity"):
            raise ParameterError(f"unknown direction {self.direction!r}")


def trace_pair(w, p=None):
    """``U = (W(t)/t^{p+1})^{1/p}``, ``V = w^{1/p}``, running integral from 0."""
    p = float(w.p if p is None else p)
    U = lambda t: np.power(cumulative_W(w, t) / np.power(t, p + 1.0), 1.0 / p)
    V = lambda t: np.power(w(t), 1.0 / p)
    return HardyPair(U, V, "from_zero", tuple(b for b in w.breakpoints if b > 0), "trace")


def extension_pairs(w, p=None):
    """The two pairs bounding the Laplace-type extension operator.

    Returns
    -------
    (HardyPair, HardyPair)
        ``U = w^{1/p}/t``, ``V = (W/t)^{1/p}`` from 0, and
        ``U = w^{1/p}``, ``V = W^{1/p} t^{1-1/p}`` from ∞.
    """
    p = float(w.p if p is None else p)
    bps = tuple(b for b in w.breakpoints if b > 0)
    U0 = lambda t: np.power(w(t), 1.0 / p) / t
    V0 = lambda t: np.power(cumulative_W(w, t) / t, 1.0 / p)
    Ui = lambda t: np.power(w(t), 1.0 / p)
    Vi = lambda t: np.power(cumulative_W(w, t), 1.0 / p) * np.power(t, 1.0 - 1.0 / p)
    return (HardyPair(U0, V0, "from_zero", bps, "extension_zero"),
            HardyPair(Ui, Vi, "from_infinity", bps, "extension_infinity"))


@dataclass
class HardyResult:
    """Hardy constant B with its maximizing r and the per-r products."""

    B: float
    witness_r: float
    r: np.ndarray
    products: np.ndarray
    u_norms: np.ndarray
    v_norms: np.ndarray
    diagnostics: dict

    def __iter__(self):
        return iter((self.B, self.witness_r))

    def r_variation(self, lo=1e-4, hi=1e4):
        """``max/min - 1`` of the products over ``r ∈ [lo, hi]``."""
        sel = (self.r >= lo) & (self.r <= hi)
        pr = self.products[sel]
        return float(pr.max() / pr.min() - 1.0)


def _safe(f):
    def g(t):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = _arr(f(t))
        return np.where(np.isnan(v), np.inf, v)

    return g


def _log_panels(f, r):
    la, lb = np.log(r[:-1]), np.log(r[1:])
    half = 0.5 * (lb - la)
    mid = 0.5 * (la + lb)
    u = np.exp(mid[:, None] + half[:, None] * GL16.nodes[None, :])
    v = f(u.ravel()).reshape(u.shape) * u
    with np.errstate(invalid="ignore"):
        out = np.sum(v * GL16.weights, axis=1) * half
    return np.where(np.isnan(out), np.inf, out)


def _tail(f, lo, hi):
    try:
        return float(integrate_dt(f, lo, hi, rtol=1e-12))
    except (DivergenceError, EvaluationError):
        return math.inf


def hardy_constants(pair, p, r_range=(1e-6, 1e6), points_per_decade=16):
    """``B₀`` or ``B∞`` of a pair as a supremum over a log grid of r.

    Norms are accumulated from Gauss--Legendre log panels between grid
    nodes plus engine tails on ``(0, r_min)`` and ``(r_max, ∞)``.  A factor
    that diverges makes the product infinite unless the other factor is
    exactly zero; when both factors diverge at some r the result is
    infinite and ``diagnostics["both_diverge"]`` is set.
    """
    p = float(p)
    q = conjugate(p)
    lo, hi = r_range
    n = int(round(points_per_decade * math.log10(hi / lo))) + 1
    r = np.unique(np.concatenate([np.geomspace(lo, hi, n),
                                  [b for b in pair.breakpoints if lo < b < hi]]))
    Up = _safe(lambda t: np.power(_arr(pair.U(t)), p))
    Vq = _safe(lambda t: np.power(1.0 / _arr(pair.V(t)), q))
    pu = _log_panels(Up, r)
    pv = _log_panels(Vq, r)
    u_lo, u_hi = _tail(Up, 0.0, lo), _tail(Up, hi, np.inf)
    v_lo, v_hi = _tail(Vq, 0.0, lo), _tail(Vq, hi, np.inf)
    with np.errstate(invalid="ignore"):
        if pair.direction == "from_zero":
            u_int = u_hi + np.concatenate([np.cumsum(pu[::-1])[::-1], [0.0]])
            v_int = v_lo + np.concatenate([[0.0], np.cumsum(pv)])
        else:
            u_int = u_lo + np.concatenate([[0.0], np.cumsum(pu)])
            v_int = v_hi + np.concatenate([np.cumsum(pv[::-1])[::-1], [0.0]])
    u_n = np.power(u_int, 1.0 / p)
    v_n = np.power(v_int, 1.0 / q)
    both = np.isinf(u_n) & np.isinf(v_n)
    with np.errstate(invalid="ignore"):
        prod = u_n * v_n
    prod = np.where((u_n == 0) | (v_n == 0), 0.0, prod)
    prod = np.where(both, np.inf, prod)
    k = int(np.argmax(prod))
    B = float(prod[k])
    return HardyResult(B, float(r[k]), r, prod, u_n, v_n, {
        "both_diverge": bool(np.any(both)),
        "u_infinite": bool(np.any(np.isinf(u_n))),
        "v_infinite": bool(np.any(np.isinf(v_n))),
        "direction": pair.direction,
    })


def _random_test_function(rng, t):
    lt = np.log(t)
    kind = rng.integers(0, 3)
    f = np.zeros_like(t)
    if kind == 0:
        for _ in range(rng.integers(1, 4)):
            m = rng.uniform(lt[0] + 1.0, lt[-1] - 1.0)
            s = rng.uniform(0.05, 2.0)
            f += rng.uniform(0.1, 1.0) * np.exp(-0.5 * ((lt - m) / s) ** 2)
    elif kind == 1:
        a, b = np.sort(rng.uniform(lt[0], lt[-1], 2))
        beta = rng.uniform(-1.5, 1.5)
        f = np.where((lt >= a) & (lt <= b), np.exp(beta * lt), 0.0)
    else:
        edges = np.sort(rng.uniform(lt[0], lt[-1], 6))
        levels = rng.uniform(0.0, 1.0, 5)
        idx = np.searchsorted(edges, lt) - 1
        ok = (idx >= 0) & (idx < 5)
        f[ok] = levels[idx[ok]]
    return f


def _hardy_ratio(pair, p, t, f, U, V, tails):
    dt = np.diff(t)
    total = float(np.sum(0.5 * dt * (f[1:] + f[:-1])))
    if total == 0.0:
        return None
    cum = np.concatenate([[0.0], np.cumsum(0.5 * dt * (f[1:] + f[:-1]))])
    F = cum if pair.direction == "from_zero" else total - cum
    lhs_v = np.abs(F * U) ** p
    rhs_v = np.abs(f * V) ** p
    lhs = float(np.sum(0.5 * dt * (lhs_v[1:] + lhs_v[:-1])))
    rhs = float(np.sum(0.5 * dt * (rhs_v[1:] + rhs_v[:-1])))
    lhs += total ** p * tails
    if rhs == 0.0:
        return math.inf if lhs > 0 else None
    return (lhs / rhs) ** (1.0 / p)


def hardy_empirical(pair, p, trials=200, seed=0, t_range=(1e-4, 1e4), points_per_decade=64,
                    B=None):
    """Largest observed ``‖F U‖_p / ‖f V‖_p`` over random test functions.

    Test functions live on a log grid and vanish outside it.  Trial 0 is
    ``f ≡ 1``; the others are bump mixtures, truncated powers and step
    functions.  Zero test functions are skipped.

    Returns
    -------
    dict
        ``C_emp``, the bound ``c(p)·B``, whether it holds, and the number
        of evaluated trials.
    """
    p = float(p)
    if B is None:
        B = hardy_constants(pair, p).B
    if not math.isfinite(B):
        raise PreconditionError("the Hardy constant B is infinite for this pair")
    lo, hi = t_range
    n = int(round(points_per_decade * math.log10(hi / lo))) + 1
    t = np.unique(np.concatenate([np.geomspace(lo, hi, n),
                                  [b for b in pair.breakpoints if lo < b < hi]]))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        U = np.nan_to_num(_arr(pair.U(t)), nan=0.0, posinf=0.0)
        V = np.nan_to_num(_arr(pair.V(t)), nan=0.0)
    Up = _safe(lambda x: np.power(_arr(pair.U(x)), p))
    tails = _tail(Up, hi, np.inf) if pair.direction == "from_zero" else _tail(Up, 0.0, lo)
    rng = np.random.default_rng(seed)
    best, used = 0.0, 0
    for i in range(int(trials)):
        f = np.ones_like(t) if i == 0 else _random_test_function(rng, t)
        ratio = _hardy_ratio(pair, p, t, f, U, V, tails)
        if ratio is None:
            continue
        used += 1
        best = max(best, ratio)
    bound = hardy_c(p) * B
    return {"C_emp": best, "bound": bound, "B": B, "c_p": hardy_c(p),
            "passed": bool(best <= bound), "trials": used}


# ---------------------------------------------------------------------------
# extension of weights from (0, T) to ℝ


def _mx_restricted(prefix, T, x, inside_only, cand):
    """Maximal function at points x outside ``(0, T)`` of a function whose
    primitive is ``prefix``; ``inside_only`` means the function vanishes
    off ``(0, T)``, otherwise it equals 1 there.

    The supremum over intervals ``[a, b] ∋ x`` is searched over candidate
    endpoints.
    """
    out = np.empty(x.size)
    for i, xi in enumerate(x):
        A = np.concatenate([cand[cand < xi], [xi]])
        Bc = np.concatenate([[xi], cand[cand > xi]])
        PA = prefix(A)
        PB = prefix(Bc)
        num = PB[None, :] - PA[:, None]
        den = Bc[None, :] - A[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            avg = np.where(den > 0, num / den, -np.inf)
        best = float(np.max(avg))
        out[i] = max(best, 0.0 if inside_only else 1.0)
    return out


def _restricted_prefix(v_prefix, T, outside_one):
    """Primitive of ``v 1_{(0,T)}`` (+ ``1`` off ``(0,T)`` if requested)."""
    VT = float(v_prefix(np.array(T)))

    def P(y):
        y = _arr(y)
        inner = np.where(y <= 0, 0.0, np.where(y >= T, VT, v_prefix(np.clip(y, 0.0, T))))
        if outside_one:
            inner = inner + np.where(y < 0, y, 0.0) + np.where(y > T, y - T, 0.0)
        return inner

    return P


def _power_split(gamma, p, g):
    """A₁ factors of ``t^{γ(1+g)}`` on ``(0, T)``: ``(e₁, e₂)`` with
    ``t^{γ(1+g)} = t^{e₁} (t^{e₂})^{1-p}`` and ``e₁, e₂ ∈ (-1, 0]``."""
    e = gamma * (1.0 + g)
    if e >= 0:
        e2 = -e / (p - 1.0)
        if e2 <= -1.0:
            raise ParameterError(f"power {e:g} is outside the A_p range for p={p:g}")
        return 0.0, e2
    if e <= -1.0:
        raise ParameterError(f"power {e:g} is not locally integrable")
    return e, 0.0


def fit_tail_slope(f, t_lo, t_hi, n=64):
    """Least-squares slope of ``log f`` against ``log t`` on ``[t_lo, t_hi]``."""
    t = np.geomspace(t_lo, t_hi, n)
    y = np.log(_arr(f(t)))
    return float(np.polyfit(np.log(t), y, 1)[0])


def extend_weight(w0, eps, factors=None, T=None, table_points=48):
    """Extend a weight on ``(0, T)`` to an A_p weight on ℝ.

    With ``1/(1+g) = 1 − ε`` the weight ``(w°)^{1+g}`` is written as
    ``v₁ v₂^{1−p}`` with A₁ factors on ``(0, T)``; outside ``(0, T)``
    the extension is ``[ℳ(v₁ 1_{(0,T)}) ℳ(v̄₂)^{1−p}]^{1−ε}`` with
    ``v̄₂ = v₂ 1_{(0,T)} + 1_{ℝ∖(0,T)}``, and inside it equals w°.  Its
    tails behave like ``|t|^{−1+ε}``.

    Parameters
    ----------
    w0 : WeightSpec
        Weight whose values on ``(0, T)`` are kept; ``T`` defaults to
        ``w0.T_horizon``.
    eps : float
        Tail parameter with ``0 < 1 − ε``.
    factors : (WeightSpec, WeightSpec), optional
        ``(v₁, v₂)``; built in for power weights.

    Raises
    ------
    ParameterError
        If ``1 − ε ≤ 0`` or ``ε ≤ 0``.
    UnsupportedError
        If no factorization is supplied for a non-power weight.
    """
    eps = float(eps)
    if 1.0 - eps <= 0.0 or eps <= 0.0:
        raise ParameterError(f"ε must satisfy 0 < ε < 1, got {eps}")
    T = float(T if T is not None else (w0.T_horizon or 1.0))
    p = w0.p
    g = eps / (1.0 - eps)
    if factors is None:
        if w0.family != "power":
            raise UnsupportedError(
                "extension of a non-power weight needs its A₁ factorization (v₁, v₂)")
        e1, e2 = _power_split(w0.gamma, p, g)
        v1, v2 = power_weight(e1, p), power_weight(e2, p)
    else:
        v1, v2 = factors
    P1 = _restricted_prefix(lambda y: _prefix(v1, 1.0)(y) - _prefix(v1, 1.0)(np.array(0.0)),
                            T, False)
    P2 = _restricted_prefix(lambda y: _prefix(v2, 1.0)(y) - _prefix(v2, 1.0)(np.array(0.0)),
                            T, True)
    inner = T * np.geomspace(1e-8, 1.0, 97)
    outer = np.concatenate([-T * np.geomspace(1e-6, 1e8, 113)[::-1],
                            [0.0], inner, T + T * np.geomspace(1e-6, 1e8, 113)])
    cand = np.unique(outer)
    xr = T + T * np.geomspace(1e-6, 1e8, table_points)
    xl = -T * np.geomspace(1e-8, 1e8, table_points)
    m1r = _mx_restricted(P1, T, xr, True, cand)
    m2r = _mx_restricted(P2, T, xr, False, cand)
    m1l = _mx_restricted(P1, T, xl, True, cand)
    m2l = _mx_restricted(P2, T, xl, False, cand)
    wr = np.power(m1r * np.power(m2r, 1.0 - p), 1.0 - eps)
    wl = np.power(m1l * np.power(m2l, 1.0 - p), 1.0 - eps)
    lr, ll = np.log(xr - T), np.log(-xl)
    slope_r = (math.log(wr[-1]) - math.log(wr[-2])) / (lr[-1] - lr[-2])
    slope_l = (math.log(wl[-1]) - math.log(wl[-2])) / (ll[-1] - ll[-2])
    lwr, lwl = np.log(wr), np.log(wl)

    def side(d, lx, lw, slope):
        ld = np.log(d)
        v = np.interp(ld, lx, lw)
        v = np.where(ld > lx[-1], lw[-1] + slope * (ld - lx[-1]), v)
        return np.exp(v)

    def ev(t):
        t = _arr(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            inside = (t > 0) & (t < T)
            right = t >= T
            out = np.empty(t.shape)
            out[inside] = w0(t[inside])
            out[right] = side(np.maximum(t[right] - T, T * 1e-6), lr, lwr, slope_r)
            left = t <= 0
            out[left] = side(np.maximum(-t[left], T * 1e-8), ll, lwl, slope_l)
        return out

    return WeightSpec("extended", {"base": w0.to_json() if w0.family == "power" else w0.family,
                                   "eps": eps, "T": T, "g": g},
                      ev, p, T_horizon=None, breakpoints=(0.0, T))
