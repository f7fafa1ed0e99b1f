"""Volterra equations, explicit extensions and Laplace trace bounds.

The local problem is ``u(t) = u₀ + ∫₀^t f``; the nonlocal one is

    ∫₀^t κ(t−s) (u(s) − u₀) ds = ∫₀^t f(s) ds,

equivalently ``∫₀^t (u − u₀) = ∫₀^t ϰ(t−s) f(s) ds`` with the resolvent
``ϰ(t)`` (the distribution function of the Sonine partner of κ).

Extensions start from a dyadic decomposition ``a = Σ_m u_m`` with ``u_m``
placed at ``λ ∈ (2^m, 2^{m+1}]`` and set

    u(t) = Σ_m b_m(t) u_m,   b_m(t) = (1/log 2) ∫_{2^m}^{2^{m+1}} Θ(t, λ) dλ/λ,
    f(t) = Σ_m β_m(t) u_m,   β_m(t) = −(1/log 2) ∫_{2^m}^{2^{m+1}} Θ(t, λ) dλ,

with ``Θ(t, λ) = e^{−tλ}`` in the local case.  In general
``Θ(t, λ) = E[e^{−λ E(t)}]`` for the first passage time ``E(t)`` of the
subordinator, so both block integrals have closed forms in terms of the
exponential integral ``E₁``.

Traces are bounded through ``K(τ, u₀) ≤ λ L[‖u‖_{X₀} + ‖f‖_{X₁}](λ)`` with
``τ = φ(λ)`` (``φ(λ) = λ`` in the local case), followed by the K-method
norm with parameter ``(W∘ψ)^{1/p}``, where ``W(t) = ∫₀^t w`` and
``ψ(t) = 1/φ^{-1}(1/t)``.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import erfcx, exp1, gamma as gamma_fn

from .errors import (DomainError, GridError, ParameterError, PreconditionError,
                     TruncationError, UnsupportedError)
from .gridfunc import GridFunction
from .interp import LebesgueCouple, SequenceCouple, phi_norm_integral
from .kernel import caputo, first_moment, laplace_phi, phi_inverse, primitive
from .product import graded_grid, product_endpoint, product_weights
from .quadrature import GaussLegendre, GL16, integrate_dt_over_t
from .scaling import ScalingFunction, certify
from .weights import WeightSpec, cumulative_W, power_weight

__all__ = [
    "VolterraSolution",
    "NormProfile",
    "Extension",
    "TraceBound",
    "RoundTripReport",
    "solve_volterra_forward",
    "residual_check",
    "interpolation_parameter",
    "construct_extension",
    "profile_from_samples",
    "trace_bound",
    "finite_interval_trace",
    "smoothstep_cutoff",
    "roundtrip_experiment",
    "default_battery",
    "run_battery_case",
    "run_battery",
]

LN2 = math.log(2.0)
GL32 = GaussLegendre.of_order(32)


def _arr(x):
    return np.asarray(x, dtype=float)


def _is_uniform(s, rtol=1e-9):
    d = np.diff(s)
    return bool(np.all(np.abs(d - d[0]) <= rtol * d[0]))


# ---------------------------------------------------------------------------
# resolvent moments


def _resolvent_functions(kappa):
    """``(R, ∫₀^u R, ∫₀^u s R(s) ds)`` for kernels with a closed-form
    resolvent, else None."""
    if "resolvent" not in kappa.exact:
        return None
    R = kappa.exact["resolvent"]
    if kappa.family == "caputo":
        a = kappa.alpha
        P = lambda u: np.power(_arr(u), 1.0 + a) / gamma_fn(2.0 + a)
        Mo = lambda u: np.power(_arr(u), 2.0 + a) / ((2.0 + a) * gamma_fn(1.0 + a))
        return R, P, Mo

    def cum(h):
        def F(u):
            u = np.atleast_1d(_arr(u))
            out = np.array([integrate_dt_over_t(lambda x, c=c: x * h(x), 0.0, c)
                            if c > 0 else 0.0 for c in u.ravel()])
            return out.reshape(u.shape)
        return F

    return R, cum(R), cum(lambda x: x * R(x))


def _conv_uniform(P, Mo, h, g):
    """``∫₀^{t_n} k(t_n − s) g(s) ds`` on a uniform grid for all n."""
    M = g.shape[0] - 1
    pw = product_weights(P, Mo, h, M)
    flat = g.reshape(M + 1, -1)
    out = pw.convolve(flat if flat.shape[1] > 1 else flat[:, 0])
    return np.asarray(out).reshape(g.shape)


def _conv_nonuniform(P, Mo, s, g):
    out = np.zeros_like(g)
    for n in range(1, s.size):
        out[n] = product_endpoint(P, Mo, s[:n + 1], g[:n + 1])[0]
    return out


def _conv(P, Mo, s, g):
    if _is_uniform(s):
        return _conv_uniform(P, Mo, s[1] - s[0], g)
    return _conv_nonuniform(P, Mo, s, g)


# ---------------------------------------------------------------------------
# forward solver


@dataclass
class VolterraSolution:
    """Result of :func:`solve_volterra_forward`.

    ``u`` is the solution, ``v`` the resolvent convolution, ``half_width``
    the 95% band of u (zero for closed-form resolvents) and ``status`` one
    of ``"ok"`` or ``"inconclusive"``.
    """

    u: GridFunction
    v: np.ndarray
    residual: float
    half_width: np.ndarray
    status: str = "ok"


def _uniform_check(grid):
    grid = _arr(grid)
    if grid[0] != 0.0 or not _is_uniform(grid):
        raise GridError("the forward solver needs a uniform grid starting at 0")
    return float(grid[1] - grid[0])


def _mc_resolvent_tables(model, grid, n, batches, jobs):
    """Batch means of ``ϰ(t) = E[E(t)]`` on the grid extended by one step."""
    from .subordinator import first_passage_times
    h = grid[1] - grid[0]
    levels = np.concatenate([grid, [grid[-1] + h]])
    e = first_passage_times(model, levels, n, jobs)
    e[:, 0] = 0.0
    return np.array([b.mean(axis=0) for b in np.array_split(e, batches)])


def _tables_to_weights(R, h):
    """Primitive and moment of the piecewise linear R on ``u = j h``."""
    u = h * np.arange(R.size)
    P = np.concatenate([[0.0], np.cumsum(0.5 * h * (R[1:] + R[:-1]))])
    mid = 0.5 * (u[1:] + u[:-1])
    sr = h / 6.0 * (u[:-1] * R[:-1] + 4.0 * mid * 0.5 * (R[:-1] + R[1:]) + u[1:] * R[1:])
    Mo = np.concatenate([[0.0], np.cumsum(sr)])
    return (lambda x: np.interp(x, u, P)), (lambda x: np.interp(x, u, Mo))


def solve_volterra_forward(kappa, u0, f, model=None, n=20_000, batches=20, jobs=1,
                           inconclusive_width=0.05):
    """Solve the nonlocal equation through the resolvent form.

    ``v(t) = ∫₀^t ϰ(t−s) f(s) ds`` is formed by product integration and
    ``u = u₀ + dv/dt`` by second-order finite differences; ``u(0) = u₀`` is
    set exactly because ``v'(0) = 0``.

    Parameters
    ----------
    kappa : KernelSpec
    u0 : float or ndarray
    f : GridFunction
        Right-hand side on a uniform grid starting at 0.
    model : SubordinatorModel, optional
        Used for a Monte Carlo resolvent when κ has no closed form one.
        The band of u then comes from batch means.

    Returns
    -------
    VolterraSolution
    """
    h = _uniform_check(f.grid)
    grid = f.grid
    u0 = np.asarray(u0, dtype=float)
    fv = f.values
    funcs = _resolvent_functions(kappa)
    if funcs is not None:
        _, P, Mo = funcs
        v = _conv_uniform(P, Mo, h, fv)
        hw = np.zeros(fv.shape)
        vs = None
    else:
        if model is None:
            raise PreconditionError("no closed-form resolvent; a subordinator model is needed")
        tables = _mc_resolvent_tables(model, grid, n, batches, jobs)
        vs = []
        for R in tables:
            P, Mo = _tables_to_weights(R, h)
            vs.append(_conv_uniform(P, Mo, h, fv))
        vs = np.array(vs)
        v = vs.mean(axis=0)
    u = u0 + np.gradient(v, h, axis=0, edge_order=2)
    u[0] = u0
    status = "ok"
    if vs is not None:
        us = np.array([np.gradient(x, h, axis=0, edge_order=2) for x in vs])
        hw = 1.96 * us.std(axis=0, ddof=1) / math.sqrt(len(us))
        hw[0] = 0.0
        scale = max(float(np.max(np.abs(u - u0))), 1e-300)
        if float(np.max(hw)) > inconclusive_width * scale:
            status = "inconclusive"
    sol = GridFunction(grid, u)
    res = residual_check(kappa, sol, f, u0) if funcs is not None else float("nan")
    return VolterraSolution(sol, v, res, hw, status)


def residual_check(kappa, u, f, u0):
    """Largest relative gap of the two equation forms on a shared grid.

    Form one compares ``∫₀^t κ(t−s)(u − u₀) ds`` with ``∫₀^t f``; form two
    compares ``∫₀^t (u − u₀)`` with ``∫₀^t ϰ(t−s) f(s) ds`` when ϰ has a
    closed form.  Each gap is divided by the largest magnitude of its two
    sides over the grid (0 when both sides vanish).
    """
    if not np.array_equal(u.grid, f.grid):
        raise GridError("u and f must share a grid")
    s = u.grid
    if s[0] != 0.0:
        raise GridError("the grid must start at 0")
    d = u.values - np.asarray(u0, dtype=float)
    F = np.zeros_like(f.values)
    F[1:] = np.cumsum(0.5 * np.diff(s).reshape((-1,) + (1,) * (f.values.ndim - 1))
                      * (f.values[1:] + f.values[:-1]), axis=0)

    def gap(lhs, rhs):
        scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
        return 0.0 if scale == 0 else float(np.max(np.abs(lhs - rhs))) / scale

    lhs1 = _conv(lambda x: primitive(kappa, x), lambda x: first_moment(kappa, x), s, d)
    out = gap(lhs1, F)
    funcs = _resolvent_functions(kappa)
    if funcs is not None:
        _, P, Mo = funcs
        D = np.zeros_like(d)
        D[1:] = np.cumsum(0.5 * np.diff(s).reshape((-1,) + (1,) * (d.ndim - 1))
                          * (d[1:] + d[:-1]), axis=0)
        out = max(out, gap(D, _conv(P, Mo, s, f.values)))
    return out


# ---------------------------------------------------------------------------
# extensions


def interpolation_parameter(w, p=None, kernel=None):
    """``W^{1/p}`` (local) or ``(W∘ψ)^{1/p}`` (with a kernel) as a
    certified scaling function.

    Raises
    ------
    PreconditionError
        If the parameter is not certified in ``I_o(0, 1)``.
    """
    p = float(w.p if p is None else p)
    if kernel is None:
        ev = lambda s: np.power(cumulative_W(w, s), 1.0 / p)
    else:
        def ev(s):
            psi = 1.0 / np.asarray(phi_inverse(kernel, 1.0 / _arr(s)), dtype=float)
            return np.power(cumulative_W(w, psi), 1.0 / p)
    phi = ScalingFunction(ev, (0.0, 1.0))
    certify(phi, (0.0, 1.0))
    return phi


def _block_u(x):
    """``(E₁(x) − E₁(2x))/log 2`` with value 1 at x = 0."""
    x = _arr(x)
    out = np.ones(x.shape)
    pos = x > 0
    xp = x[pos]
    out[pos] = (exp1(xp) - exp1(2.0 * xp)) / LN2
    return out


def _block_f(x, scale):
    """``−scale (e^{−x} − e^{−2x}) / (x log 2)`` with its limit at 0."""
    x = _arr(x)
    out = np.full(x.shape, -scale / LN2)
    pos = x > 0
    xp = x[pos]
    out[pos] = scale * np.exp(-xp) * np.expm1(-xp) / (xp * LN2)
    return out


def _theta_half(t, lam):
    return erfcx(lam * np.sqrt(t))


def _half_blocks(t, m):
    """Blocks for ``Θ(t, λ) = e^{λ²t} erfc(λ√t)`` by Gauss--Legendre in log λ."""
    t = _arr(t)
    y0, y1 = m * LN2, (m + 1) * LN2
    y = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * GL32.nodes
    wts = 0.5 * (y1 - y0) * GL32.weights
    lam = np.exp(y)
    th = _theta_half(t[:, None], lam[None, :])
    b = th @ wts / LN2
    # Θ(0, λ) = 1, so the block is exactly 1 at t = 0
    b = np.where(t == 0, 1.0, b)
    beta = -(th * lam[None, :]) @ wts / LN2
    return b, beta


@dataclass
class NormProfile:
    """Norm profiles of an extension pair on a log grid.

    ``nu = ‖u(t)‖_{X₀}``, ``nf = ‖f(t)‖_{X₁}`` and ``nu1 = ‖u(t)‖_{X₁}``;
    ``u0`` is the element ``u(0)``.  Profiles are taken constant on
    ``[0, t[0]]``; beyond ``t[-1]`` they are zero when ``truncated_at``
    is set and are otherwise assumed negligible for the Laplace parameters
    used.  ``nu_hw`` and ``nf_hw`` are 95% half widths (Monte Carlo).
    """

    t: np.ndarray
    nu: np.ndarray
    nf: np.ndarray
    u0: np.ndarray
    nu1: np.ndarray = None
    nu_hw: np.ndarray = None
    nf_hw: np.ndarray = None
    truncated_at: float = None


@dataclass
class Extension:
    """An extension pair ``(u, f)`` with ``u(0) = a``.

    Attributes
    ----------
    levels : ndarray
        Block exponents m.
    elements : ndarray
        Block elements stacked along the first axis.
    norm_u, norm_f : float
        ``‖u‖_{L_p(w; X₀)}`` and ``‖f‖_{L_p(w; X₁)}``.
    norm_a : float
        ``‖a‖`` in the interpolation space with parameter ``phi_int``.
    ci : float
        Half width of ``norm_u + norm_f`` (Monte Carlo Θ), else 0.
    """

    couple: object
    a: np.ndarray
    w: WeightSpec
    p: float
    mode: str
    kernel: object
    phi_int: ScalingFunction
    theta_source: str
    levels: np.ndarray
    elements: np.ndarray
    norm_u: float = float("nan")
    norm_f: float = float("nan")
    norm_a: float = float("nan")
    ci: float = 0.0
    mc: dict = field(default_factory=dict, repr=False)

    # -- block functions --------------------------------------------------

    def decay_times(self):
        """Time scale at which each block has decayed."""
        lam = np.exp2(self.levels.astype(float))
        if self.mode == "local":
            return 1.0 / lam
        return 1.0 / np.asarray(phi_inverse(self.kernel, lam), dtype=float)

    def block_functions(self, t):
        """``(b, β, b_hw, β_hw)`` with shapes ``(len(t), n_blocks)``."""
        t = _arr(t)
        nb = self.levels.size
        z = np.zeros((t.size, nb))
        if nb == 0:
            return z, z, z, z
        lam = np.exp2(self.levels.astype(float))
        if self.theta_source == "exp":
            x = t[:, None] * lam[None, :]
            b = _block_u(x)
            beta = np.stack([_block_f(x[:, i], lam[i]) for i in range(nb)], axis=1)
            return b, beta, z, z
        if self.theta_source == "closed_form":
            cols = [_half_blocks(t, int(m)) for m in self.levels]
            return (np.stack([c[0] for c in cols], axis=1),
                    np.stack([c[1] for c in cols], axis=1), z, z)
        return self._mc_blocks(t)

    def _mc_blocks(self, t):
        grid, E = self.mc["grid"], self.mc["E"]
        idx = np.searchsorted(grid, t)
        if np.any(grid[np.clip(idx, 0, grid.size - 1)] != t) and not np.all(t == 0):
            raise DomainError("Monte Carlo blocks are available on their sampling grid only")
        lam = np.exp2(self.levels.astype(float))
        nb = lam.size
        b = np.zeros((t.size, nb))
        beta = np.zeros((t.size, nb))
        bh = np.zeros((t.size, nb))
        fh = np.zeros((t.size, nb))
        n = E.shape[0]
        for r, ti in enumerate(t):
            if ti == 0:
                b[r] = 1.0
                beta[r] = -lam / LN2
                continue
            e = E[:, idx[r]]
            for i in range(nb):
                xu = _block_u(e * lam[i])
                xf = _block_f(e * lam[i], lam[i])
                b[r, i], beta[r, i] = xu.mean(), xf.mean()
                bh[r, i] = 1.96 * xu.std(ddof=1) / math.sqrt(n)
                fh[r, i] = 1.96 * xf.std(ddof=1) / math.sqrt(n)
        return b, beta, bh, fh

    def u(self, t):
        b, _, _, _ = self.block_functions(t)
        return np.tensordot(b, self.elements, axes=(1, 0)) if self.levels.size else \
            np.zeros((_arr(t).size,) + np.shape(self.a))

    def f(self, t):
        _, beta, _, _ = self.block_functions(t)
        return np.tensordot(beta, self.elements, axes=(1, 0)) if self.levels.size else \
            np.zeros((_arr(t).size,) + np.shape(self.a))

    def sample(self, grid):
        """``(u, f)`` as grid functions."""
        grid = _arr(grid)
        return GridFunction(grid, self.u(grid)), GridFunction(grid, self.f(grid))

    # -- norms --------------------------------------------------------------

    def _norm_rows(self, X, which):
        return _batch_norm(self.couple, X, which)

    def element_norms(self, which):
        return np.array([_norm_of(self.couple, e, which) for e in self.elements])

    def profile(self, t=None, ppd=64):
        """Norm profiles on a log grid covering every block scale."""
        if t is None:
            t = self.default_grid(ppd)
        t = _arr(t)
        b, beta, bh, fh = self.block_functions(t)
        if self.levels.size == 0:
            z = np.zeros(t.size)
            return NormProfile(t, z, z, np.zeros_like(self.a), z)
        U = np.tensordot(b, self.elements, axes=(1, 0))
        F = np.tensordot(beta, self.elements, axes=(1, 0))
        nu = self._norm_rows(U, 0)
        nf = self._norm_rows(F, 1)
        nu1 = self._norm_rows(U, 1)
        prof = NormProfile(t, nu, nf, np.array(self.a), nu1)
        if self.theta_source == "mc":
            prof.nu_hw = bh @ self.element_norms(0)
            prof.nf_hw = fh @ self.element_norms(1)
        return prof

    def default_grid(self, ppd=64):
        if self.theta_source == "mc":
            return self.mc["grid"][1:]
        tau = self.decay_times() if self.levels.size else np.array([1.0])
        lo = float(np.min(tau)) * 1e-8
        if self.mode == "local":
            hi = float(np.max(tau)) * 60.0
        else:
            hi = float(np.max(tau)) * 1e16
        n = int(math.ceil(math.log10(hi / lo) * ppd)) + 1
        return np.geomspace(lo, hi, n)

    def residual(self):
        """Defining-equation residual.

        Local mode: ``max |u(t) − a − ∫₀^t f|`` over a log grid relative to
        the largest block, computed per block.  Nonlocal mode:
        :func:`residual_check` per block on a cosine-graded grid, or on the
        first-passage grid for Monte Carlo blocks, where the value includes
        sampling noise and the coarser grid.
        """
        if self.levels.size == 0:
            return 0.0
        if self.mode == "local":
            t = self.default_grid(32)
            edges = np.concatenate([[0.0], t])
            x = 0.5 * (edges[:-1, None] + edges[1:, None]) + \
                0.5 * (edges[1:, None] - edges[:-1, None]) * GL16.nodes[None, :]
            wq = 0.5 * (edges[1:, None] - edges[:-1, None]) * GL16.weights[None, :]
            _, beta, _, _ = self.block_functions(x.ravel())
            beta = beta.reshape(x.shape + (self.levels.size,))
            integ = np.cumsum(np.einsum("pq,pqb->pb", wq, beta), axis=0)
            b, _, _, _ = self.block_functions(t)
            return float(np.max(np.abs(b - 1.0 - integ)))
        worst = 0.0
        for i, m in enumerate(self.levels):
            T = 4.0 * float(self.decay_times()[i])
            if self.theta_source == "mc":
                s = self.mc["grid"][self.mc["grid"] <= T]
                b, beta, _, _ = self.block_functions(s)
                b, beta = b[:, i], beta[:, i]
            else:
                s = graded_grid(T, 1024)
                b, beta = _half_blocks(s, int(m))
            worst = max(worst, residual_check(self.kernel, GridFunction(s, b),
                                              GridFunction(s, beta), 1.0))
        return worst


def _norm_of(couple, x, which):
    return couple.norm0(x) if which == 0 else couple.norm1(x)


def _batch_norm(couple, X, which):
    if isinstance(couple, SequenceCouple):
        return couple.batch_norm(X, which)
    return np.array([_norm_of(couple, x, which) for x in X])


def _lp_norm_integral(prof_fn, w, p, breakpoints):
    g = lambda t: t * w(t) * prof_fn(t) ** p
    return float(integrate_dt_over_t(g, breakpoints=tuple(breakpoints),
                                     panels_per_decade=4)) ** (1.0 / p)


def _mc_model(kernel, seed):
    from .subordinator import compound_poisson, cutoff_for_intensity, exact_stable
    if kernel.family == "caputo":
        return exact_stable(kernel.alpha, seed)
    return compound_poisson(kernel, cutoff_for_intensity(kernel, 200.0), seed)


def construct_extension(a, couple, w, p=None, mode="local", kernel=None,
                        theta_source="auto", n_mc=4000, seed=42, jobs=1, mc_ppd=16):
    """Extension pair with ``u(0) = a`` from the canonical decomposition.

    Parameters
    ----------
    a : ndarray
        Element of a sequence or Besov couple.
    couple : SequenceCouple or BesovCouple
    w : WeightSpec
    p : float, optional
        Defaults to ``w.p``.
    mode : {"local", "nonlocal"}
    kernel : KernelSpec
        Required in nonlocal mode.
    theta_source : {"auto", "closed_form", "mc"}
        Nonlocal Θ: the closed form needs ``φ(λ) = √λ``; ``"auto"`` picks
        it when available and Monte Carlo otherwise.

    Raises
    ------
    PreconditionError
        If the interpolation parameter is not certified in ``I_o(0, 1)``.
    """
    if isinstance(couple, LebesgueCouple):
        raise UnsupportedError("extensions need array-valued couple elements")
    if mode not in ("local", "nonlocal"):
        raise ParameterError(f"unknown mode {mode!r}")
    p = float(w.p if p is None else p)
    if mode == "nonlocal":
        if kernel is None:
            raise ParameterError("nonlocal mode needs a kernel")
        half = kernel.family == "caputo" and kernel.alpha == 0.5
        if theta_source == "auto":
            theta_source = "closed_form" if half else "mc"
        if theta_source == "closed_form" and not half:
            raise UnsupportedError("closed-form Θ needs the Caputo kernel of order 1/2")
        if theta_source not in ("closed_form", "mc"):
            raise ParameterError(f"unknown Θ source {theta_source!r}")
    else:
        kernel = None
        theta_source = "exp"
    phi_int = interpolation_parameter(w, p, kernel)
    a = np.asarray(a)
    blocks = couple.canonical_blocks(a)
    levels = np.array(sorted(blocks), dtype=int)
    elements = np.array([blocks[m] for m in levels]) if levels.size else \
        np.zeros((0,) + a.shape)
    ext = Extension(couple, a, w, p, mode, kernel, phi_int, theta_source, levels, elements)
    if levels.size == 0:
        ext.norm_u = ext.norm_f = ext.norm_a = 0.0
        return ext
    ext.norm_a = float(phi_norm_integral(couple, phi_int, p, a))
    if theta_source == "mc":
        from .subordinator import first_passage_times
        tau = ext.decay_times()
        lo, hi = float(np.min(tau)) * 1e-4, float(np.max(tau)) * 1e6
        grid = np.geomspace(lo, hi, int(math.ceil(math.log10(hi / lo) * mc_ppd)) + 1)
        E = first_passage_times(_mc_model(kernel, seed), grid, n_mc, jobs)
        ext.mc = {"grid": np.concatenate([[0.0], grid]),
                  "E": np.concatenate([np.zeros((n_mc, 1)), E], axis=1)}
        prof = ext.profile()
        t = prof.t
        y = np.log(t)
        wt = w(t) * t

        def norm(v):
            return (float(np.trapezoid(wt * v ** p, y)) + v[0] ** p
                    * float(cumulative_W(w, t[0]))) ** (1.0 / p)

        nu, nf = norm(prof.nu), norm(prof.nf)
        hi_ = norm(prof.nu + prof.nu_hw) + norm(prof.nf + prof.nf_hw)
        lo_ = norm(np.maximum(prof.nu - prof.nu_hw, 0)) + \
            norm(np.maximum(prof.nf - prof.nf_hw, 0))
        ext.norm_u, ext.norm_f = nu, nf
        ext.ci = 0.5 * (hi_ - lo_)
        return ext
    bps = ext.decay_times()
    E0 = ext.elements

    def nu(t):
        b, _, _, _ = ext.block_functions(t)
        return _batch_norm(couple, np.tensordot(b, E0, axes=(1, 0)), 0)

    def nf(t):
        _, beta, _, _ = ext.block_functions(t)
        return _batch_norm(couple, np.tensordot(beta, E0, axes=(1, 0)), 1)

    ext.norm_u = _lp_norm_integral(nu, w, p, bps)
    ext.norm_f = _lp_norm_integral(nf, w, p, bps)
    return ext


def profile_from_samples(u, f, couple):
    """Norm profiles from sampled ``u`` and ``f`` whose grid starts at 0."""
    if not np.array_equal(u.grid, f.grid):
        raise GridError("u and f must share a grid")
    if u.grid[0] != 0.0:
        raise GridError("the grid must start at 0 so that u(0) is known")
    t = u.grid[1:]
    return NormProfile(t, _batch_norm(couple, u.values[1:], 0),
                       _batch_norm(couple, f.values[1:], 1), u.values[0],
                       _batch_norm(couple, u.values[1:], 1))


# ---------------------------------------------------------------------------
# trace bounds


@dataclass
class TraceBound:
    """Upper bound for ``‖u₀‖`` in the interpolation space.

    ``bound`` is ``Φ_p^φ`` of the Laplace envelope ``K_upper`` sampled at
    ``tau``; ``direct`` is the norm of ``u₀`` computed from its own
    K-functional (when a couple is given).
    """

    bound: float
    direct: float
    tau: np.ndarray
    K_upper: np.ndarray
    tails: tuple
    details: dict = field(default_factory=dict)


def _laplace(prof_t, g, lam, truncated=False):
    """``L[g](λ)`` with g constant on ``[0, t₀]`` and trapezoidal in log t."""
    t = prof_t
    y = np.log(t)
    E = np.exp(-lam[:, None] * t[None, :]) * (t * g)[None, :]
    head = g[0] * -np.expm1(-lam * t[0]) / lam
    return head + np.trapezoid(E, y, axis=1)


def _phi_b(kernel, lam):
    return lam if kernel is None else np.asarray(laplace_phi(kernel, lam), dtype=float)


def _tail_integral(x, F, side, n=12):
    """Power-law tail of ``∫ F dx/x`` beyond the sampled range of log x."""
    sl = slice(0, n) if side == "left" else slice(-n, None)
    xx, FF = np.log(x[sl]), F[sl]
    if np.all(FF == 0):
        return 0.0
    if np.any(FF <= 0):
        raise TruncationError(f"the {side} tail of the trace integrand is not resolved")
    slope = np.polyfit(xx, np.log(FF), 1)[0]
    if side == "left" and slope <= 0.02 or side == "right" and slope >= -0.02:
        raise TruncationError(
            f"the trace integrand does not decay at the {side} end (log slope {slope:.3g}); "
            "u and f must decay fast enough for the Laplace bound")
    return float(FF[0] / slope) if side == "left" else float(-FF[-1] / slope)


def _phi_integral(phi_int, p, tau, K):
    F = (np.asarray(phi_int(1.0 / tau), dtype=float) * K) ** p
    if not np.all(np.isfinite(F)):
        raise TruncationError("the trace integrand is not finite on the parameter grid")
    core = float(np.trapezoid(F, np.log(tau)))
    left = _tail_integral(tau, F, "left")
    right = _tail_integral(tau, F, "right")
    return (core + left + right) ** (1.0 / p), (left, right)


def _lam_grid(t, ppd, g=None, truncated=False):
    """Laplace parameters resolved by the profile grid.

    Below ``40/t[-1]`` the transform would see the unsampled tail, unless
    the profile has already decayed to rounding level there.
    """
    lo = 40.0 / t[-1]
    if truncated:
        lo = 1e-8 / t[-1]
    elif g is not None:
        tg = t * g
        if tg[-1] <= 1e-13 * np.max(tg):
            lo = 1e-8 / t[-1]
    hi = 1e3 / t[0]
    return np.geomspace(lo, hi, int(math.ceil(math.log10(hi / lo) * ppd)) + 1)


def trace_bound(profile, w, p=None, kernel=None, couple=None, phi_int=None, lam_ppd=32):
    """Trace bound from the Laplace representation of ``u₀``.

    ``K(τ, u₀) ≤ λ L[‖u‖_{X₀} + ‖f‖_{X₁}](λ)`` at ``τ = φ(λ)``, then
    ``Φ_p^{φ_int}`` of that envelope.

    Parameters
    ----------
    profile : NormProfile or Extension
    w : WeightSpec
    kernel : KernelSpec, optional
        Nonlocal mode when given.
    couple : optional
        Used for the direct norm of ``u₀``.

    Raises
    ------
    TruncationError
        If the envelope integrand does not decay at either end.
    """
    if isinstance(profile, Extension):
        couple = profile.couple if couple is None else couple
        phi_int = profile.phi_int if phi_int is None else phi_int
        profile = profile.profile()
    p = float(w.p if p is None else p)
    if phi_int is None:
        phi_int = interpolation_parameter(w, p, kernel)
    t = profile.t
    g = profile.nu + profile.nf
    if np.all(g == 0):
        return TraceBound(0.0, 0.0, np.array([]), np.array([]), (0.0, 0.0))
    lam = _lam_grid(t, lam_ppd, g)
    K = lam * _laplace(t, g, lam)
    tau = _phi_b(kernel, lam)
    bound, tails = _phi_integral(phi_int, p, tau, K)
    direct = float("nan")
    if couple is not None:
        direct = float(phi_norm_integral(couple, phi_int, p, profile.u0))
    return TraceBound(float(bound), direct, tau, K, tails)


def smoothstep_cutoff(s, T):
    """Quintic cutoff ζ with ζ = 1 on ``[0, T/2]``, ζ = 0 on ``[T, ∞)``,
    and its derivative; ζ is twice continuously differentiable."""
    s = _arr(s)
    x = np.clip((s - 0.5 * T) / (0.5 * T), 0.0, 1.0)
    S = x ** 3 * (10.0 - 15.0 * x + 6.0 * x * x)
    dS = 30.0 * x * x * (1.0 - x) ** 2 / (0.5 * T)
    return 1.0 - S, -dS


def finite_interval_trace(source, T, couple, w, p=None, kernel=None, phi_int=None,
                          ppd=64, t_min=None, lam_ppd=32):
    """Trace bound from data on ``(0, T)`` only.

    Parameters
    ----------
    source : Extension or tuple of GridFunction
        ``(u, f)`` evaluated on ``(0, T)``; a pair of grid functions must
        start at 0.
    T : float
    couple :
        Needs an embedding constant ``‖·‖_{X₁} ≤ N ‖·‖_{X₀}``.
    kernel : KernelSpec, optional
        Nonlocal mode when given.

    Local mode multiplies by the smoothstep ζ and bounds the trace of
    ``(ζu, ζf + ζ′u)``.  Nonlocal mode extends u and f by zero and adds
    the term ``λ² ‖u₀‖_{X₁} ∫_T^∞ e^{−λt} ∫₀^t κ`` to the envelope, with
    ``‖u₀‖_{X₁}`` bounded through the Laplace transform at ``λ = 1``.

    Raises
    ------
    PreconditionError
        If the couple has no embedding constant.
    """
    N = getattr(couple, "embedding_constant", None)
    if N is None:
        raise PreconditionError("finite-interval traces need X₀ embedded in X₁")
    T = float(T)
    p = float(w.p if p is None else p)
    if phi_int is None:
        phi_int = source.phi_int if isinstance(source, Extension) else \
            interpolation_parameter(w, p, kernel)
    if isinstance(source, Extension):
        lo = t_min or float(source.default_grid()[0])
        t = np.geomspace(lo, T, int(math.ceil(math.log10(T / lo) * ppd)) + 1)
        U, F = source.u(t), source.f(t)
        u0 = np.array(source.a)
    else:
        u, f = source
        if u.grid[0] != 0.0:
            raise GridError("the grid must start at 0")
        keep = (u.grid > 0) & (u.grid <= T)
        t, U, F, u0 = u.grid[keep], u.values[keep], f.values[keep], u.values[0]
    details = {"embedding_constant": N, "T": T}
    if kernel is None:
        z, dz = smoothstep_cutoff(t, T)
        shape = (-1,) + (1,) * (U.ndim - 1)
        Ut = z.reshape(shape) * U
        Ft = z.reshape(shape) * F + dz.reshape(shape) * U
        prof = NormProfile(t, _batch_norm(couple, Ut, 0), _batch_norm(couple, Ft, 1), u0,
                           truncated_at=T)
        res = trace_bound(prof, w, p, None, couple, phi_int, lam_ppd)
        res.details.update(details)
        return res
    nu = _batch_norm(couple, U, 0)
    nf = _batch_norm(couple, F, 1)
    nu1 = _batch_norm(couple, U, 1)
    y = np.log(t)
    ex = np.exp(-t) * t
    lhs = float(np.trapezoid(ex * nu1, y)) * float(_phi_b(kernel, np.array(1.0))) + \
        float(np.trapezoid(ex * nf, y)) + (nu1[0] * float(_phi_b(kernel, 1.0)) + nf[0]) * \
        -math.expm1(-t[0])
    tk = np.geomspace(t[0], T, 4 * ppd + 1)
    denom = float(np.trapezoid(np.exp(-tk) * tk * primitive(kernel, tk), np.log(tk)))
    u0_x1_bound = lhs / denom
    lam = _lam_grid(t, lam_ppd, nu + nf, truncated=True)
    K = lam * (_laplace(t, nu, lam) + _laplace(t, nf, lam))
    s = np.geomspace(T, T + 60.0 / lam[0], 1025)
    I3 = np.trapezoid(np.exp(-lam[:, None] * s[None, :]) * (s * primitive(kernel, s))[None, :],
                      np.log(s), axis=1)
    K = K + lam ** 2 * I3 * u0_x1_bound
    tau = _phi_b(kernel, lam)
    bound, tails = _phi_integral(phi_int, p, tau, K)
    direct = float(phi_norm_integral(couple, phi_int, p, u0))
    details.update({"u0_X1_bound": u0_x1_bound, "u0_X1": float(couple.norm1(u0))})
    return TraceBound(float(bound), direct, tau, K, tails, details)


# ---------------------------------------------------------------------------
# round trips and the battery


@dataclass
class RoundTripReport:
    """One direction of a round trip: ``ratio = lhs_norm / rhs_norm``."""

    direction: str
    lhs_norm: float
    rhs_norm: float
    ratio: float
    config: dict = field(default_factory=dict)

    @property
    def finite(self):
        return bool(np.isfinite(self.ratio))


def roundtrip_experiment(a, couple, w, p=None, mode="local", kernel=None, **kwargs):
    """Extension followed by the trace bound on the constructed pair.

    Returns ``(extension_report, trace_report, extension)``; for ``a = 0``
    both ratios are NaN (0/0 is skipped).
    """
    ext = construct_extension(a, couple, w, p, mode, kernel, **kwargs)
    cfg = {"mode": mode, "p": ext.p, "weight": w.params, "couple": type(couple).__name__,
           "kernel": None if kernel is None else kernel.params}
    total = ext.norm_u + ext.norm_f
    if ext.levels.size == 0:
        nan = float("nan")
        return (RoundTripReport("extension", 0.0, 0.0, nan, cfg),
                RoundTripReport("trace", 0.0, 0.0, nan, cfg), ext)
    tb = trace_bound(ext, w, ext.p, ext.kernel)
    return (RoundTripReport("extension", total, ext.norm_a, total / ext.norm_a, cfg),
            RoundTripReport("trace", tb.bound, total, tb.bound / total,
                            dict(cfg, direct=tb.direct)), ext)


def default_battery():
    """The 22 default cases: local mode for γ ∈ {−0.5, 0, 0.5} and
    k ∈ {−4, −2, 0, 2, 4}, and nonlocal mode with α = 0.5, γ = −0.5 and
    k ∈ {−3, ..., 3}; data ``a = e_k`` in the sequence couple
    ``(ℓ_∞^0, ℓ_∞^{−1})``, p = 2."""
    cases = []
    for g in (-0.5, 0.0, 0.5):
        for k in (-4, -2, 0, 2, 4):
            cases.append({"case_id": f"local_g{g:+.1f}_k{k:+d}", "mode": "local",
                          "alpha": None, "gamma": g, "p": 2.0, "k": k})
    for k in range(-3, 4):
        cases.append({"case_id": f"nonlocal_a0.5_g-0.5_k{k:+d}", "mode": "nonlocal",
                      "alpha": 0.5, "gamma": -0.5, "p": 2.0, "k": k})
    return {"couple": {"q0": "inf", "sigma0": 0.0, "q1": "inf", "sigma1": -1.0, "J": 8},
            "seed": 42, "cases": cases}


def _couple_from(d):
    q0 = math.inf if str(d.get("q0", "inf")) == "inf" else float(d["q0"])
    q1 = math.inf if str(d.get("q1", "inf")) == "inf" else float(d["q1"])
    return SequenceCouple(q0, float(d.get("sigma0", 0.0)), q1, float(d.get("sigma1", -1.0)),
                          int(d.get("J", 8)))


def run_battery_case(case, couple_desc, seed=42):
    """One battery row: ``case_id, mode, alpha, gamma, p, ext_ratio,
    trace_ratio, residual, ci``."""
    couple = _couple_from(couple_desc)
    p = float(case.get("p", 2.0))
    w = power_weight(float(case["gamma"]), p)
    kernel = caputo(float(case["alpha"])) if case["mode"] == "nonlocal" else None
    a = couple.unit(int(case["k"]), float(case.get("scale", 1.0)))
    ext_r, tr_r, ext = roundtrip_experiment(a, couple, w, p, case["mode"], kernel,
                                            theta_source=case.get("theta_source", "auto"),
                                            seed=int(seed))
    return {"case_id": case["case_id"], "mode": case["mode"], "alpha": case.get("alpha"),
            "gamma": float(case["gamma"]), "p": p, "ext_ratio": ext_r.ratio,
            "trace_ratio": tr_r.ratio, "residual": ext.residual(), "ci": ext.ci}


def _case_task(args):
    return run_battery_case(*args)


def run_battery(battery=None, jobs=1):
    """Run every case; rows come back in case order regardless of ``jobs``.

    Case i uses the seed ``battery["seed"] + i``.
    """
    battery = default_battery() if battery is None else battery
    seed = int(battery.get("seed", 42))
    tasks = [(c, battery["couple"], seed + i) for i, c in enumerate(battery["cases"])]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=int(jobs)) as ex:
            return list(ex.map(_case_task, tasks))
    return [_case_task(t) for t in tasks]
