"""Kernels κ, their Bernstein functions φ and derived scale functions.

A kernel is a right-continuous decreasing function on (0, ∞) with
``κ(0+) = ∞``, ``κ(∞) = 0`` and ``∫₀¹ κ < ∞``.  Its Lévy measure is only
used through the increments ``μ((s, t]) = κ(s) − κ(t)`` and its Bernstein
function is ``φ(λ) = λ ℒ[κ](λ)``.

Families
--------
``caputo(α)``
    ``κ(t) = t^{-α}/Γ(1-α)`` with ``φ(λ) = λ^α``.
``sum_of_powers([(c, α), ...])``
    ``κ(t) = Σ c_i t^{-α_i}/Γ(1-α_i)``, so ``φ(λ) = Σ c_i λ^{α_i}``.
``tabulated``
    Samples ``(t_i, κ_i)`` with log-log linear or right-continuous step
    interpolation.
``custom``
    Any vectorized evaluator (used for test kernels and extensions).
"""

from dataclasses import dataclass, field, replace
import csv
import math

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import (DivergenceError, EvaluationError, NotExtendableError,
                     ParameterError, PreconditionError, RangeError)
from .quadrature import integrate_dt_over_t, QuadratureInfo
from .reports import EquivalenceReport
from .scaling import GridSpec, ScalingFunction, fit_membership

__all__ = [
    "KernelSpec",
    "BernsteinFunction",
    "caputo",
    "sum_of_powers",
    "tabulated",
    "custom",
    "load_kernel_csv",
    "laplace_phi",
    "phi_derivative",
    "bernstein",
    "phi_inverse",
    "generalized_inverse",
    "kappa_star_psi",
    "primitive",
    "first_moment",
    "check_kernel_phi_equivalence",
    "extend_kernel",
]


def _arr(x):
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class KernelSpec:
    """A decreasing kernel together with whatever closed forms it admits.

    Attributes
    ----------
    family : str
        ``caputo``, ``sum_of_powers``, ``tabulated``, ``custom`` or
        ``extended``.
    params : dict
        Family parameters (JSON friendly).
    evaluator : callable
        Vectorized ``t -> κ(t)``.
    T_horizon : float or None
        Finite horizon for kernels given only on ``(0, T)``.
    class_bounds : tuple
        Declared scaling class, ``(-1, 0)`` by default.
    grid : GridSpec
        Grid for invariant checks, inverses and suprema.
    exact : dict
        Optional closed forms keyed by ``phi``, ``dphi``, ``primitive``,
        ``moment``, ``inverse``, ``phi_inverse``.
    """

    family: str
    params: dict
    evaluator: object
    T_horizon: float = None
    class_bounds: tuple = (-1.0, 0.0)
    grid: GridSpec = field(default_factory=GridSpec)
    exact: dict = field(default_factory=dict)

    def __call__(self, t):
        return self.evaluator(_arr(t))

    @property
    def alpha(self):
        """Order of a Caputo kernel (``None`` for other families)."""
        return self.params.get("alpha") if self.family == "caputo" else None

    def as_scaling(self, grid=None):
        """κ viewed as a scaling function with the kernel's class bounds."""
        return ScalingFunction(self.evaluator, tuple(self.class_bounds),
                               grid or self.grid)

    def to_json(self):
        d = {"family": self.family}
        d.update(self.params)
        if self.T_horizon is not None:
            d["T_horizon"] = self.T_horizon
        return d

    @classmethod
    def from_json(cls, d):
        """Build from a descriptor such as ``{"family": "caputo", "alpha": 0.5}``."""
        d = dict(d)
        fam = d.pop("family", None)
        T = d.pop("T_horizon", None)
        if fam == "caputo":
            k = caputo(d["alpha"])
        elif fam == "sum_of_powers":
            k = sum_of_powers([tuple(x) for x in d["terms"]])
        elif fam == "tabulated":
            if "csv" in d:
                k = load_kernel_csv(d["csv"], d.get("interp", "loglinear"))
            else:
                k = tabulated(d["t"], d["values"], d.get("interp", "loglinear"))
        else:
            raise ParameterError(f"unknown kernel family {fam!r}")
        return replace(k, T_horizon=T) if T is not None else k

    def check_invariants(self, slope_tol=1e-3):
        """Verify monotonicity, the end behaviour and local integrability.

        Returns a list of violation messages (empty when all hold).
        """
        msgs = []
        t = self.grid.points()
        if self.T_horizon is not None:
            t = t[t < self.T_horizon]
        v = self(t)
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            msgs.append("kernel is not finite and nonnegative on the grid")
            return msgs
        if np.any(np.diff(v) > 0):
            i = int(np.argmax(np.diff(v) > 0))
            msgs.append(f"kernel increases between t={t[i]:.6g} and t={t[i+1]:.6g}")
        lo = math.log(v[8] / v[0]) / math.log(t[8] / t[0]) if v[8] > 0 else -np.inf
        if not lo < -slope_tol:
            msgs.append("kernel does not blow up at 0+ on the grid")
        if self.T_horizon is None:
            if v[-1] > 0:
                hi = math.log(v[-1] / v[-9]) / math.log(t[-1] / t[-9]) if v[-9] > 0 else -np.inf
                if not hi < -slope_tol:
                    msgs.append("kernel does not decay at infinity on the grid")
        try:
            primitive(self, 1.0 if self.T_horizon is None else min(1.0, self.T_horizon))
        except (DivergenceError, EvaluationError):
            msgs.append("kernel is not integrable near 0")
        return msgs


# ---------------------------------------------------------------------------
# constructors


def sum_of_powers(terms, grid=None):
    """``κ(t) = Σ c_i t^{-α_i}/Γ(1-α_i)`` with all closed forms attached."""
    terms = [(float(c), float(a)) for c, a in terms]
    if not terms:
        raise ParameterError("sum_of_powers needs at least one term")
    for c, a in terms:
        if not (0.0 < a < 1.0) or c <= 0:
            raise ParameterError(
                f"term (c={c}, α={a}) needs c > 0 and α strictly inside (0, 1)")
    cs = np.array([c for c, _ in terms])
    al = np.array([a for _, a in terms])
    g1 = gamma_fn(1.0 - al)
    g2 = gamma_fn(2.0 - al)

    def _sum(t, f):
        t = _arr(t)
        out = np.zeros(np.shape(t))
        for i in range(len(cs)):
            out = out + f(t, i)
        return out

    kappa = lambda t: _sum(t, lambda x, i: cs[i] * np.power(x, -al[i]) / g1[i])
    exact = {
        "phi": lambda l: _sum(l, lambda x, i: cs[i] * np.power(x, al[i])),
        "dphi": lambda l: _sum(l, lambda x, i: cs[i] * al[i] * np.power(x, al[i] - 1.0)),
        "primitive": lambda t: _sum(t, lambda x, i: cs[i] * np.power(x, 1.0 - al[i]) / g2[i]),
        "moment": lambda t: _sum(
            t, lambda x, i: cs[i] * np.power(x, 2.0 - al[i]) / ((2.0 - al[i]) * g1[i])),
    }
    if len(terms) == 1:
        c, a = terms[0]
        exact["inverse"] = lambda lam: np.power(_arr(lam) * g1[0] / c, -1.0 / a)
        exact["phi_inverse"] = lambda x: np.power(_arr(x) / c, 1.0 / a)
    return KernelSpec("sum_of_powers", {"terms": [list(x) for x in terms]},
                      kappa, exact=exact, grid=grid or GridSpec())


def caputo(alpha, grid=None):
    """Caputo kernel ``t^{-α}/Γ(1-α)``; requires ``0 < α < 1``."""
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"Caputo order must lie strictly in (0, 1), got {alpha}")
    k = sum_of_powers([(1.0, alpha)], grid)
    exact = dict(k.exact)
    exact["phi"] = lambda l: np.power(_arr(l), alpha)
    exact["dphi"] = lambda l: alpha * np.power(_arr(l), alpha - 1.0)
    exact["resolvent"] = lambda t: np.power(_arr(t), alpha) / gamma_fn(1.0 + alpha)
    return replace(k, family="caputo", params={"alpha": alpha}, exact=exact)


def tabulated(t, values, interp="loglinear", grid=None):
    """Kernel from samples; ``interp`` is ``loglinear`` or ``step``.

    ``step`` is right-continuous: the value ``values[i]`` holds on
    ``[t[i], t[i+1])``.  ``loglinear`` extrapolates the end slopes.
    """
    tt = _arr(t)
    vv = _arr(values)
    if tt.ndim != 1 or tt.size < 2 or np.any(np.diff(tt) <= 0) or np.any(tt <= 0):
        raise ParameterError("tabulated kernel needs strictly increasing positive t")
    if np.any(vv <= 0):
        raise ParameterError("tabulated kernel values must be positive")
    if interp == "loglinear":
        lt, lv = np.log(tt), np.log(vv)
        s0 = (lv[1] - lv[0]) / (lt[1] - lt[0])
        s1 = (lv[-1] - lv[-2]) / (lt[-1] - lt[-2])

        def ev(x):
            x = _arr(x)
            lx = np.log(x)
            y = np.interp(lx, lt, lv)
            y = np.where(lx < lt[0], lv[0] + s0 * (lx - lt[0]), y)
            y = np.where(lx > lt[-1], lv[-1] + s1 * (lx - lt[-1]), y)
            return np.exp(y)
    elif interp == "step":
        def ev(x):
            x = _arr(x)
            i = np.searchsorted(tt, x, side="right") - 1
            return np.where(i < 0, vv[0], vv[np.clip(i, 0, None)])
    else:
        raise ParameterError(f"unknown interpolation {interp!r}")
    return KernelSpec("tabulated", {"t": tt.tolist(), "values": vv.tolist(),
                                    "interp": interp}, ev, grid=grid or GridSpec())


def custom(evaluator, T_horizon=None, grid=None, exact=None, name="custom"):
    """Wrap an arbitrary vectorized evaluator as a kernel."""
    return KernelSpec(name, {}, evaluator, T_horizon,
                      grid=grid or GridSpec(), exact=dict(exact or {}))


def load_kernel_csv(path, interp="loglinear"):
    """Read a two-column CSV ``t, kappa`` (an optional header is skipped)."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise
    arr = np.array(rows)
    return tabulated(arr[:, 0], arr[:, 1], interp)


# ---------------------------------------------------------------------------
# Laplace transform and Bernstein function


def laplace_phi(kappa, lam, method="auto"):
    """Bernstein function ``φ(λ) = λ ∫₀^∞ e^{-λt} κ(t) dt``.

    With the substitution ``s = λt`` the integral becomes
    ``∫ e^{-s} κ(s/λ) ds``; it is split at ``s = 1`` (``t = 1/λ``) and each
    side is integrated with log panels (two per decade), the upper side
    being exponentially weighted.

    Parameters
    ----------
    method : {"auto", "quadrature"}
        ``auto`` uses a closed form when the family has one.
    """
    lam = _arr(lam)
    if np.any(lam <= 0):
        raise ParameterError("λ must be positive")
    if method == "auto" and "phi" in kappa.exact:
        out = kappa.exact["phi"](lam)
        return float(out) if lam.ndim == 0 else out
    flat = lam.ravel()

    def g(s):
        return s[None, :] * np.exp(-s[None, :]) * kappa(s[None, :] / flat[:, None])

    info = QuadratureInfo()
    try:
        out = integrate_dt_over_t(g, breakpoints=(1.0,), panels_per_decade=2,
                                  info=info)
    except DivergenceError as err:
        raise EvaluationError(
            f"Laplace quadrature did not converge ({err}); panels used: "
            f"{info.n_panels}") from err
    out = np.asarray(out).reshape(lam.shape)
    return float(out) if lam.ndim == 0 else out


def phi_derivative(kappa, lam, rel_step=1e-6):
    """``φ'(λ)``: closed form when available, else central differences."""
    lam = _arr(lam)
    if "dphi" in kappa.exact:
        out = kappa.exact["dphi"](lam)
    else:
        h = rel_step * lam
        out = (laplace_phi(kappa, lam + h) - laplace_phi(kappa, lam - h)) / (2.0 * h)
    return float(out) if lam.ndim == 0 else out


@dataclass(frozen=True)
class BernsteinFunction:
    """φ with its derivative; ``source`` records where it came from."""

    phi: object
    dphi: object
    source: str

    def __call__(self, lam):
        return self.phi(lam)


def bernstein(kappa):
    """The Bernstein function of a kernel."""
    src = "analytic" if "phi" in kappa.exact else "from_kernel"
    return BernsteinFunction(lambda l: laplace_phi(kappa, l),
                             lambda l: phi_derivative(kappa, l), src)


def phi_inverse(kappa, x, lam_range=(1e-14, 1e14)):
    """Inverse of the Bernstein function by bisection in ``log λ``."""
    x = _arr(x)
    if "phi_inverse" in kappa.exact:
        out = kappa.exact["phi_inverse"](x)
        return float(out) if x.ndim == 0 else out
    lo_v, hi_v = laplace_phi(kappa, np.array(lam_range))
    if np.any(x < lo_v) or np.any(x > hi_v):
        raise RangeError(f"φ^{{-1}} query outside [{lo_v:.6g}, {hi_v:.6g}]",
                         (float(lo_v), float(hi_v)))
    flat = x.ravel()
    lo = np.full(flat.shape, math.log(lam_range[0]))
    hi = np.full(flat.shape, math.log(lam_range[1]))
    while np.any(hi - lo > 1e-13):
        mid = 0.5 * (lo + hi)
        up = laplace_phi(kappa, np.exp(mid)) >= flat
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    out = np.exp(hi).reshape(x.shape)
    return float(out) if x.ndim == 0 else out


# ---------------------------------------------------------------------------
# generalized inverse


def generalized_inverse(kappa, lam, method="bisection", rtol=1e-12):
    """``κ^{-1}(λ) = inf{s > 0 : κ(s) ≤ λ}`` by bisection in ``log s``.

    At a jump of κ the jump location is returned (right-continuity).

    Raises
    ------
    RangeError
        If λ lies outside ``[κ(t_max), κ(t_min)]``; ``err.achievable``
        holds that interval.
    """
    lam = _arr(lam)
    if np.any(lam <= 0):
        raise ParameterError("λ must be positive")
    if method == "exact" and "inverse" in kappa.exact:
        out = kappa.exact["inverse"](lam)
        return float(out) if lam.ndim == 0 else out
    t_lo, t_hi = kappa.grid.t_min, kappa.grid.t_max
    if kappa.T_horizon is not None:
        t_hi = min(t_hi, kappa.T_horizon)
    k_lo, k_hi = float(kappa(t_hi)), float(kappa(t_lo))
    if np.any(lam < k_lo) or np.any(lam > k_hi):
        raise RangeError(
            f"λ outside the achievable interval [{k_lo:.6g}, {k_hi:.6g}]",
            (k_lo, k_hi))
    flat = lam.ravel()
    lo = np.full(flat.shape, math.log(t_lo))
    hi = np.full(flat.shape, math.log(t_hi))
    tol = math.log1p(rtol) * 0.1
    while np.any(hi - lo > tol):
        mid = 0.5 * (lo + hi)
        below = kappa(np.exp(mid)) <= flat
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
    out = np.exp(hi).reshape(lam.shape)
    return float(out) if lam.ndim == 0 else out


def kappa_star_psi(kappa, t):
    """Return ``(κ*(t), ψ(t))`` with ``κ*(t) = κ^{-1}(1/t)`` and
    ``ψ(t) = 1/φ^{-1}(1/t)``."""
    t = _arr(t)
    if np.any(t <= 0):
        raise ParameterError("t must be positive")
    ks = generalized_inverse(kappa, 1.0 / t)
    psi = 1.0 / phi_inverse(kappa, 1.0 / t)
    return ks, psi


# ---------------------------------------------------------------------------
# primitives used by product integration


def primitive(kappa, t):
    """``K(t) = ∫₀^t κ(s) ds``."""
    t = _arr(t)
    if "primitive" in kappa.exact:
        out = kappa.exact["primitive"](t)
    else:
        flat = t.ravel()
        g = lambda x: flat[:, None] * x[None, :] * kappa(flat[:, None] * x[None, :])
        out = np.where(flat > 0, integrate_dt_over_t(g, 0.0, 1.0), 0.0)
        out = np.asarray(out).reshape(t.shape)
    return float(out) if t.ndim == 0 else out


def first_moment(kappa, t):
    """``M(t) = ∫₀^t s κ(s) ds``."""
    t = _arr(t)
    if "moment" in kappa.exact:
        out = kappa.exact["moment"](t)
    else:
        flat = t.ravel()
        g = lambda x: (flat[:, None] * x[None, :]) ** 2 * kappa(flat[:, None] * x[None, :])
        out = np.where(flat > 0, integrate_dt_over_t(g, 0.0, 1.0), 0.0)
        out = np.asarray(out).reshape(t.shape)
    return float(out) if t.ndim == 0 else out


# ---------------------------------------------------------------------------
# equivalence check


def _refine_log_grid(x):
    x = np.asarray(x, dtype=float)
    mid = np.sqrt(x[:-1] * x[1:])
    return np.sort(np.concatenate([x, mid]))


def check_kernel_phi_equivalence(kappa, lam_grid, threshold=0.01):
    """Check ``φ(λ) ≃ κ(1/λ)`` together with the derivative band of φ.

    The report's ratios are ``φ(λ)/κ(1/λ)``; ``refinement_delta`` is the
    relative change of the band ends when the λ grid is doubled.  Details
    include the fitted ``N`` in ``λφ' ≤ φ ≤ Nλφ'`` and the membership fit
    of ``ℒ[κ](λ) = φ(λ)/λ`` in ``I_o(-1, 0)``.

    Raises
    ------
    PreconditionError
        If κ is not certified in ``I_o(-1, 0)``.
    """
    fit = fit_membership(kappa.as_scaling())
    if not fit.member:
        raise PreconditionError(
            f"kernel not certified in I_o{tuple(kappa.class_bounds)}: fitted "
            f"exponents ({fit.a_hat:.6g}, {fit.b_hat:.6g})")
    lam = np.asarray(lam_grid, dtype=float)
    ratio = laplace_phi(kappa, lam) / kappa(1.0 / lam)
    lam2 = _refine_log_grid(lam)
    ratio2 = laplace_phi(kappa, lam2) / kappa(1.0 / lam2)
    delta = max(abs(ratio2.min() / ratio.min() - 1.0),
                abs(ratio2.max() / ratio.max() - 1.0))
    phi = laplace_phi(kappa, lam)
    lpd = lam * phi_derivative(kappa, lam)
    band = phi / lpd
    deriv_ok = bool(np.all(band >= 1.0 - 1e-6))
    lk_grid = GridSpec(1e-6, 1e6, 16)
    lk = ScalingFunction(lambda l: laplace_phi(kappa, l) / l, (-1.0, 0.0), lk_grid)
    lk_fit = fit_membership(lk, K=10)
    details = {
        "N_fit": float(band.max()),
        "phi_over_lambda_dphi_min": float(band.min()),
        "derivative_band_ok": deriv_ok,
        "laplace_member": lk_fit.member,
        "laplace_exponents": (lk_fit.a_hat, lk_fit.b_hat),
        "kernel_exponents": (fit.a_hat, fit.b_hat),
    }
    return EquivalenceReport.from_ratios(
        ratio, delta, threshold, extra_ok=deriv_ok and lk_fit.member,
        details=details)


# ---------------------------------------------------------------------------
# extension beyond a finite horizon


def _restricted_dilation(values, max_shift):
    """``s°(2^{j/m})`` on an octave grid from kernel values ``values[i]``.

    Entry j is ``max_i values[i+j]/values[i]`` over pairs inside the grid,
    which is the restricted supremum over ``0 < t < λt < T``.
    """
    n = values.size
    out = np.empty(max_shift + 1)
    low = np.empty(max_shift + 1)
    for j in range(max_shift + 1):
        r = values[j:] / values[:n - j]
        out[j] = r.max()
        low[j] = r.min()
    return out, low


def extend_kernel(kappa0, K=20):
    """Extend a kernel given on ``(0, T)`` to ``(0, ∞)``.

    For ``t ≥ T`` the extension is ``inf_{r<T} κ°(r) s°(t/r)`` where ``s°``
    is the dilation supremum restricted to ``0 < t < (1∧λ^{-1}) T``.  The
    infimum runs over the kernel grid inside ``(0, T)`` plus the point
    ``T(1 - 1e-9)``; ``s°`` is tabulated on the octave grid,
    interpolated log-linearly and continued past the table with the slope
    of its last octave.  A right-continuous version is taken where
    the extension jumps.

    Raises
    ------
    PreconditionError
        If κ° is not decreasing on its grid.
    NotExtendableError
        If the restricted scaling bounds fail; ``err.side`` names the side.
    """
    T = kappa0.T_horizon
    if T is None:
        raise PreconditionError("extend_kernel needs a kernel with T_horizon")
    grid = kappa0.grid
    t = grid.points()
    t = t[t < T]
    v = kappa0(t)
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise PreconditionError("κ° must be finite and positive on (0, T)")
    if np.any(np.diff(v) > 0):
        i = int(np.argmax(np.diff(v) > 0))
        raise PreconditionError(
            f"κ° must be decreasing; it increases near t={t[i]:.6g}")
    m = grid.points_per_octave
    max_shift = t.size - 2
    s_up, s_low = _restricted_dilation(v, max_shift)
    ln2 = math.log(2.0)
    kk = min(K * m, max_shift)
    sel = np.arange(0, kk + 1, m)
    up = np.log(s_up[sel])
    low = np.log(s_low[sel])
    b_hat = float(np.max(np.diff(up) / ln2))
    a_hat = float(np.min(np.diff(low) / ln2))
    if not b_hat < 0.0:
        raise NotExtendableError(
            f"restricted upper exponent {b_hat:.6g} is not below 0", "upper")
    if not a_hat > -1.0:
        raise NotExtendableError(
            f"restricted lower exponent {a_hat:.6g} is not above -1", "lower")
    log_lam = np.arange(max_shift + 1) * (ln2 / m)
    log_s = np.log(s_up)
    r = np.concatenate([t, [T * (1.0 - 1e-9)]])
    kr = kappa0(r)

    # beyond the table, log s° continues with the slope of its last octave
    tail = (log_s[-1] - log_s[-1 - m]) / (log_lam[-1] - log_lam[-1 - m])

    def s0(lam):
        x = np.log(lam)
        y = np.interp(x, log_lam, log_s)
        y = np.where(x > log_lam[-1], log_s[-1] + tail * (x - log_lam[-1]), y)
        return np.exp(y)

    def outer(x):
        x = _arr(x)
        lam = x[:, None] / r[None, :]
        cand = kr[None, :] * s0(lam)
        cand = np.where(np.isnan(cand), np.inf, cand)
        return cand.min(axis=1)

    def ext(x):
        x = _arr(x)
        flat = x.ravel()
        out = np.empty(flat.shape)
        inside = flat < T
        out[inside] = kappa0(flat[inside])
        o = ~inside
        if np.any(o):
            xo = flat[o]
            here = outer(xo)
            right = outer(xo * (1.0 + 1e-6))
            jump = here - right > 1e-4 * here
            out[o] = np.where(jump, right, here)
        return out.reshape(x.shape)

    return KernelSpec("extended", {"base": kappa0.family, "T": T}, ext, None,
                      kappa0.class_bounds, grid,
                      exact={})
