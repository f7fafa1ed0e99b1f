"""Dilation suprema and the scaling classes I(a, b), I_o(a, b).

For a positive function φ on (0, ∞) the dilation supremum is
``s_φ(λ) = sup_{t>0} φ(λt)/φ(t)``.  A function belongs to the open class
``I_o(a, b)`` when for some ε > 0 and all λ ≥ 1

    λ^{a+ε} ≲ φ(λt)/φ(t) ≲ λ^{b-ε}.

The supremum is approximated on a logarithmic grid.  The grid is built from
octaves (a fixed number of points per factor 2, the smallest count that
reaches the requested points per decade) so that multiplying a grid point by
``2^k`` lands on another grid point exactly.  This keeps the sampled
supremum submultiplicative for dyadic λ up to effects at the grid ends.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import (DomainError, EvaluationError, InsufficientDataError,
                     MonotonicityError, ParameterError, PreconditionError)
from .quadrature import integrate_dt_over_t
from .reports import EquivalenceReport

__all__ = [
    "GridSpec",
    "ScalingFunction",
    "DilationReport",
    "MembershipFit",
    "power",
    "eval_dilation_supremum",
    "dilation_report",
    "fit_membership",
    "transform",
    "check_integral_majorant",
]

FIT_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Logarithmic evaluation grid on ``[t_min, t_max]``."""

    t_min: float = 1e-8
    t_max: float = 1e8
    points_per_decade: int = 64

    @property
    def points_per_octave(self):
        return int(math.ceil(self.points_per_decade * math.log10(2.0)))

    def points(self):
        """Grid points ``2^(k/m)`` in ``[t_min, t_max]``, m points per octave.

        Points are formed as ``2^q * 2^(r/m)`` with integer q so that dyadic
        dilations of grid points are bit-exact grid points.
        """
        m = self.points_per_octave
        k0 = math.ceil(math.log2(self.t_min) * m - 1e-9)
        k1 = math.floor(math.log2(self.t_max) * m + 1e-9)
        k = np.arange(k0, k1 + 1)
        q, r = np.divmod(k, m)
        base = np.exp2(np.arange(m) / m)
        return np.ldexp(base[r], q)

    def refined(self):
        return replace(self, points_per_decade=2 * self.points_per_decade)


def _as_array(t):
    return np.asarray(t, dtype=float)


@dataclass(frozen=True)
class ScalingFunction:
    """A positive function on ``(0, ∞)`` with optional declared class bounds.

    Parameters
    ----------
    evaluator : callable
        Vectorized map ``t -> φ(t)``.
    class_bounds : tuple of float, optional
        Declared ``(a, b)`` such that φ is claimed to lie in ``I_o(a, b)``.
    grid : GridSpec
        Grid used for suprema and fits.
    descriptor : dict, optional
        JSON description used for serialization.
    """

    evaluator: object
    class_bounds: tuple = None
    grid: GridSpec = field(default_factory=GridSpec)
    descriptor: dict = None

    def __call__(self, t):
        return self.evaluator(_as_array(t))

    def with_bounds(self, a, b):
        return replace(self, class_bounds=(float(a), float(b)))

    def scaled(self, c):
        """The function ``c·φ`` with the same bounds and grid."""
        ev = self.evaluator
        return replace(self, evaluator=lambda t: c * ev(t), descriptor=None)

    def to_json(self):
        if self.descriptor is None:
            raise ValueError("this scaling function has no JSON descriptor")
        d = dict(self.descriptor)
        if self.class_bounds is not None:
            d["bounds"] = list(self.class_bounds)
        return d

    @classmethod
    def from_json(cls, d):
        """Build from ``{"kind": "power"|"caputo"|"table"|"expr", ...}``."""
        d = dict(d)
        kind = d.get("kind")
        bounds = tuple(d["bounds"]) if "bounds" in d else None
        grid = GridSpec(**d["grid"]) if "grid" in d else GridSpec()
        if kind == "power":
            theta = float(d["theta"])
            ev = lambda t: np.power(t, theta)
            desc = {"kind": "power", "theta": theta}
        elif kind == "caputo":
            alpha = float(d["alpha"])
            g = gamma_fn(1.0 - alpha)
            ev = lambda t: np.power(t, -alpha) / g
            desc = {"kind": "caputo", "alpha": alpha}
        elif kind == "table":
            tt = np.asarray(d["t"], dtype=float)
            vv = np.asarray(d["values"], dtype=float)
            if np.any(np.diff(tt) <= 0) or np.any(tt <= 0) or np.any(vv <= 0):
                raise ParameterError("table needs increasing positive t and positive values")
            ev = _loglinear(tt, vv)
            desc = {"kind": "table", "t": tt.tolist(), "values": vv.tolist()}
        elif kind == "expr":
            ev = compile_expression(d["expr"])
            desc = {"kind": "expr", "expr": d["expr"]}
        else:
            raise ParameterError(f"unknown scaling function kind {kind!r}")
        return cls(ev, bounds, grid, desc)


def _loglinear(tt, vv):
    """Log-log linear interpolation with linear extrapolation of the ends."""
    lt = np.log(tt)
    lv = np.log(vv)
    s0 = (lv[1] - lv[0]) / (lt[1] - lt[0])
    s1 = (lv[-1] - lv[-2]) / (lt[-1] - lt[-2])

    def ev(t):
        x = np.log(_as_array(t))
        y = np.interp(x, lt, lv)
        y = np.where(x < lt[0], lv[0] + s0 * (x - lt[0]), y)
        y = np.where(x > lt[-1], lv[-1] + s1 * (x - lt[-1]), y)
        return np.exp(y)

    return ev


_EXPR_NAMES = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "minimum": np.minimum,
    "maximum": np.maximum, "abs": np.abs, "where": np.where,
    "power": np.power, "gamma": gamma_fn, "pi": np.pi, "e": np.e,
    "log1p": np.log1p, "expm1": np.expm1,
}


def compile_expression(expr):
    """Compile a numpy expression in the variable ``t``.

    Only a fixed table of numpy functions is visible to the expression.
    """
    code = compile(expr, "<expr>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMES and name != "t":
            raise ParameterError(f"name {name!r} is not allowed in expressions")

    def ev(t):
        env = dict(_EXPR_NAMES)
        env["t"] = _as_array(t)
        return np.asarray(eval(code, {"__builtins__": {}}, env), dtype=float)

    return ev


def power(theta, bounds=None, grid=None):
    """``φ(t) = t^θ``."""
    d = {"kind": "power", "theta": float(theta)}
    if bounds is not None:
        d["bounds"] = list(bounds)
    sf = ScalingFunction.from_json(d)
    return replace(sf, grid=grid) if grid is not None else sf


# ---------------------------------------------------------------------------
# dilation suprema


def _checked(phi, t):
    v = np.asarray(phi(t), dtype=float)
    v = np.broadcast_to(v, np.shape(t))
    bad = ~np.isfinite(v) | (v <= 0)
    if np.any(bad):
        tb = np.asarray(t)[bad].ravel()[0]
        raise EvaluationError(
            f"scaling function is not finite and positive at t={tb:.6g}")
    return v


def eval_dilation_supremum(phi, lam):
    """Grid approximation of ``s_φ(λ) = sup_t φ(λt)/φ(t)``.

    Parameters
    ----------
    phi : ScalingFunction
    lam : float or array_like
        Dilation factor(s), positive.

    Returns
    -------
    float or ndarray
        Maximum of ``φ(λt)/φ(t)`` over the grid; a lower bound of the true
        supremum.
    """
    lam = _as_array(lam)
    if np.any(lam <= 0):
        raise ParameterError("dilation factor must be positive")
    t = phi.grid.points()
    base = _checked(phi, t)
    flat = lam.ravel()
    out = np.empty(flat.size)
    for i, l in enumerate(flat):
        if l == 1.0:
            out[i] = 1.0
            continue
        out[i] = np.max(_checked(phi, l * t) / base)
    return float(out[0]) if lam.ndim == 0 else out.reshape(lam.shape)


@dataclass
class DilationReport:
    """Sampled dilation supremum on λ = 2^k, k = -K..K."""

    lambdas: np.ndarray
    s_hat: np.ndarray
    a_hat: float
    b_hat: float
    envelope_constant: float

    def submultiplicativity_violation(self):
        """Largest ``s(λτ)/(s(λ)s(τ)) - 1`` over sampled dyadic pairs."""
        k = np.rint(np.log2(self.lambdas)).astype(int)
        idx = {kk: i for i, kk in enumerate(k)}
        worst = -np.inf
        for i, ki in enumerate(k):
            for j, kj in enumerate(k):
                m = idx.get(ki + kj)
                if m is None:
                    continue
                worst = max(worst, self.s_hat[m] / (self.s_hat[i] * self.s_hat[j]) - 1.0)
        return worst


@dataclass
class MembershipFit:
    """Fitted exponents and the membership verdict of :func:`fit_membership`.

    Unpacks as ``a_hat, b_hat, eps_hat``.
    """

    a_hat: float
    b_hat: float
    eps_hat: float
    member: bool
    report: DilationReport

    def __iter__(self):
        return iter((self.a_hat, self.b_hat, self.eps_hat))


def dilation_report(phi, K=20):
    """Dilation supremum on ``λ = 2^k``, ``k = -K..K``, with fitted exponents.

    Upper exponent: largest secant slope of ``log s(λ)`` between consecutive
    dyadic λ ≥ 1.  Lower exponent: smallest secant slope of the infimum
    ``log(1/s(1/λ))`` over the same λ, which is the quantity bounded below by
    ``λ^{a+ε}`` in the class definition.
    """
    K = int(K)
    ks = np.arange(-K, K + 1)
    if ks.size < 3:
        raise InsufficientDataError(
            f"need at least 3 dilation samples, got {ks.size}")
    lam = np.ldexp(1.0, ks)
    s = eval_dilation_supremum(phi, lam)
    log_s = np.log(s)
    up = log_s[K:]                      # λ = 2^0 .. 2^K
    low = -log_s[K::-1]                 # log inf-ratio at λ = 2^0 .. 2^K
    ln2 = math.log(2.0)
    b_slopes = np.diff(up) / ln2
    a_slopes = np.diff(low) / ln2
    b_hat = float(np.max(b_slopes))
    a_hat = float(np.min(a_slopes))
    b_tail = float(b_slopes[-1])
    a_tail = float(a_slopes[-1])
    env_up = np.max(np.exp(up - b_tail * ks[K:] * ln2))
    env_low = np.max(np.exp(-low - (-a_tail) * ks[K:] * ln2))
    return DilationReport(lam, s, a_hat, b_hat, float(max(env_up, env_low)))


def fit_membership(phi, K=20, tol=FIT_TOL):
    """Fit the scaling exponents of φ and decide membership in I_o(a, b).

    Returns
    -------
    MembershipFit
        ``eps_hat = min(a_hat - a, b - b_hat)`` when bounds are declared
        (else NaN); ``member`` is True iff ``eps_hat > tol``.
    """
    rep = dilation_report(phi, K)
    if phi.class_bounds is None:
        return MembershipFit(rep.a_hat, rep.b_hat, float("nan"), False, rep)
    a, b = phi.class_bounds
    eps = min(rep.a_hat - a, b - rep.b_hat)
    member = bool(a < b and eps > tol)
    return MembershipFit(rep.a_hat, rep.b_hat, float(eps), member, rep)


def certify(phi, bounds, K=20):
    """Raise :class:`PreconditionError` unless φ is certified in I_o(bounds)."""
    fit = fit_membership(replace(phi, class_bounds=tuple(bounds)), K)
    if not fit.member:
        raise PreconditionError(
            f"function not certified in I_o{tuple(bounds)}: fitted exponents "
            f"({fit.a_hat:.6g}, {fit.b_hat:.6g})")
    return fit


# ---------------------------------------------------------------------------
# transforms


def _power_bounds(bounds, alpha):
    if bounds is None:
        return None
    a, b = bounds
    return (alpha * a, alpha * b) if alpha >= 0 else (alpha * b, alpha * a)


def _inverse_evaluator(phi):
    t = phi.grid.points()
    v = _checked(phi, t)
    if np.any(np.diff(v) <= 0):
        i = int(np.argmax(np.diff(v) <= 0))
        raise MonotonicityError(
            f"function is not strictly increasing near t={t[i]:.6g}")
    lo_t, hi_t = phi.grid.t_min * 1e-30, phi.grid.t_max * 1e30
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        lo_v, hi_v = float(phi(lo_t)), float(phi(hi_t))

    def inv(x):
        x = _as_array(x)
        if np.any(~(x >= lo_v)) or np.any(~(x <= hi_v)):
            raise DomainError(
                f"inverse query outside the range [{lo_v:.6g}, {hi_v:.6g}]")
        lo = np.full(x.shape, math.log(lo_t))
        hi = np.full(x.shape, math.log(hi_t))
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            up = phi(np.exp(mid)) >= x
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
            if np.all(hi - lo < 1e-13):
                break
        return np.exp(0.5 * (lo + hi))

    return inv, (float(v[0]), float(v[-1]))


def transform(phi, kind, alpha=None, theta0=None, theta1=None):
    """Apply a class-preserving transformation to φ.

    Parameters
    ----------
    kind : str
        One of ``power_weight`` (t^α φ(t)), ``argument_power`` (φ(t^α)),
        ``value_power`` (φ(t)^α), ``inverse`` (φ^{-1}), ``reflect``
        (t φ(1/t)) and ``stability`` (s^{θ₀} φ(s^{θ₁-θ₀})).

    Returns
    -------
    ScalingFunction
        With class bounds moved accordingly when φ has declared bounds.
    """
    ev = phi.evaluator
    bounds = phi.class_bounds
    grid = phi.grid
    if kind == "power_weight":
        al = float(alpha)
        new = lambda t: np.power(t, al) * ev(t)
        nb = None if bounds is None else (bounds[0] + al, bounds[1] + al)
    elif kind == "argument_power":
        al = float(alpha)
        new = lambda t: ev(np.power(t, al))
        nb = _power_bounds(bounds, al)
    elif kind == "value_power":
        al = float(alpha)
        new = lambda t: np.power(ev(t), al)
        nb = _power_bounds(bounds, al)
    elif kind == "inverse":
        new, (v0, v1) = _inverse_evaluator(phi)
        if bounds is not None and not (bounds[0] > 0):
            raise PreconditionError("inverse requires positive class bounds")
        nb = None if bounds is None else (1.0 / bounds[1], 1.0 / bounds[0])
        grid = GridSpec(v0, v1, grid.points_per_decade)
    elif kind == "reflect":
        new = lambda t: t * ev(1.0 / t)
        nb = None if bounds is None else (1.0 - bounds[1], 1.0 - bounds[0])
        grid = GridSpec(1.0 / grid.t_max, 1.0 / grid.t_min, grid.points_per_decade)
    elif kind == "stability":
        th0, th1 = float(theta0), float(theta1)
        d = th1 - th0
        new = lambda t: np.power(t, th0) * ev(np.power(t, d))
        inner = _power_bounds(bounds, d)
        nb = None if inner is None else (inner[0] + th0, inner[1] + th0)
    else:
        raise ParameterError(f"unknown transform kind {kind!r}")
    return ScalingFunction(new, nb, grid, None)


# ---------------------------------------------------------------------------
# integral majorants


def _majorant_ratio(phi, p, side, x, ppd):
    fx = float(_checked(phi, np.array([x]))[0])
    if side == "upper":
        g = lambda t: np.minimum(1.0, x / t) ** p * phi(t)
    else:
        g = lambda t: np.minimum(1.0, t / x) ** p * phi(t)
    val = integrate_dt_over_t(g, breakpoints=(x,), panels_per_decade=ppd)
    return val / fx


def check_integral_majorant(phi, p, side, x_grid, threshold=0.01):
    """Check ``∫(1∧x/t)^p φ(t) dt/t ≲ φ(x)`` (upper) or its mirror (lower).

    The integral is evaluated at every x and divided by φ(x); the report
    holds the extremes of that ratio and the relative change of the maximum
    when the panel density doubles.

    Raises
    ------
    PreconditionError
        If declared class bounds contradict the side's requirement.
    DivergenceError
        If a tail does not decay; ``err.end`` names the end.
    """
    p = float(p)
    if p < 0:
        raise ParameterError("p must be nonnegative")
    if side not in ("upper", "lower"):
        raise ParameterError("side must be 'upper' or 'lower'")
    if phi.class_bounds is not None:
        a, b = phi.class_bounds
        lo, hi = (0.0, p) if side == "upper" else (-p, 0.0)
        if a < lo or b > hi:
            raise PreconditionError(
                f"declared bounds ({a}, {b}) are not inside [{lo}, {hi}]")
    xs = np.atleast_1d(_as_array(x_grid))
    r1 = np.array([_majorant_ratio(phi, p, side, x, 1) for x in xs])
    r2 = np.array([_majorant_ratio(phi, p, side, x, 2) for x in xs])
    delta = float(np.max(np.abs(r2 - r1) / np.abs(r1)))
    return EquivalenceReport.from_ratios(
        r1, delta, threshold, details={"x": xs.tolist(), "ratios": r1.tolist()})
