"""Log-panel Gauss--Legendre quadrature for integrals against dt/t.

Most integrals in the library have the form ``∫ g(t) dt/t`` over a subset of
``(0, ∞)`` with integrands that are smooth in ``log t`` and decay (or grow)
like powers at both ends.  The engine below integrates panel by panel in the
variable ``u = ln t``:

* a core region around ``t = 1`` and all requested breakpoints is covered by
  decade-aligned panels (``panels_per_decade`` per factor of ten), split at
  every breakpoint;
* the two tails are then extended one panel at a time until a panel
  contributes less than ``rtol`` of the running sum, or until the panel
  contributions decay geometrically at a stable ratio, in which case the
  remaining geometric tail is added in closed form;
* tails whose contributions stop decaying raise :class:`DivergenceError`
  naming the offending end.

The integrand may carry leading batch dimensions: ``g(t)`` receives a 1-D
array of nodes and returns an array whose last axis matches the nodes.  All
batch members are integrated with the same panels until every member has
converged.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, EvaluationError

__all__ = [
    "GaussLegendre",
    "QuadratureInfo",
    "integrate_dt_over_t",
    "integrate_dt",
    "gauss_legendre_cells",
]

_LOG10 = np.log(10.0)
_LOG10_TMIN = -300.0
_LOG10_TMAX = 300.0


@dataclass(frozen=True)
class GaussLegendre:
    """Gauss--Legendre rule on ``[-1, 1]``."""

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def of_order(cls, n):
        x, w = np.polynomial.legendre.leggauss(n)
        return cls(x, w)


GL16 = GaussLegendre.of_order(16)


@dataclass
class QuadratureInfo:
    """Diagnostics of one call to :func:`integrate_dt_over_t`."""

    n_panels: int = 0
    log10_lo: float = 0.0
    log10_hi: float = 0.0
    lower_tail: float = 0.0
    upper_tail: float = 0.0


def _panel_values(g, edges, rule, batch_shape=None):
    """Integrate ``g(t) dt/t`` over log10-panels with the given edges.

    Returns an array of shape ``batch + (n_panels,)``.
    """
    edges = np.asarray(edges, dtype=float)
    la = edges[:-1] * _LOG10
    lb = edges[1:] * _LOG10
    half = 0.5 * (lb - la)
    mid = 0.5 * (lb + la)
    u = mid[:, None] + half[:, None] * rule.nodes[None, :]
    t = np.exp(u).ravel()
    vals = np.asarray(g(t), dtype=float)
    if vals.shape[-1] != t.size:
        vals = np.broadcast_to(vals, vals.shape[:-1] + (t.size,))
    if not np.all(np.isfinite(vals)):
        bad = np.nonzero(~np.isfinite(vals.reshape(-1, t.size)).any(axis=0))[0]
        raise EvaluationError(
            f"integrand is not finite at t={t[bad[0]]:.6g}")
    vals = vals.reshape(vals.shape[:-1] + (len(half), rule.nodes.size))
    return np.sum(vals * rule.weights, axis=-1) * half


def _core_edges(lo10, hi10, breakpoints, ppd):
    """Decade-aligned edges on ``[lo10, hi10]`` merged with breakpoints."""
    k0 = np.ceil(lo10 * ppd - 1e-9)
    k1 = np.floor(hi10 * ppd + 1e-9)
    grid = np.arange(k0, k1 + 1) / ppd
    pts = np.concatenate([[lo10, hi10], grid, breakpoints])
    pts = pts[(pts >= lo10) & (pts <= hi10)]
    pts = np.unique(np.round(pts, 13))
    keep = np.concatenate([[True], np.diff(pts) > 1e-12])
    return pts[keep]


class _Tail:
    """Convergence bookkeeping for one tail direction over a batch."""

    def __init__(self, n_batch, rtol, end):
        self.prev = np.full(n_batch, np.nan)
        self.prev_ratio = np.full(n_batch, np.nan)
        self.done = np.zeros(n_batch, dtype=bool)
        self.tail = np.zeros(n_batch)
        self.flat = np.zeros(n_batch, dtype=int)
        self.count = 0
        self.rtol = rtol
        self.end = end

    def update(self, c, total):
        """Feed one panel contribution per batch member; returns new total."""
        self.count += 1
        active = ~self.done
        total = total + np.where(active, c, 0.0)
        scale = np.abs(total)
        small = np.abs(c) <= self.rtol * scale
        small_prev = np.abs(self.prev) <= self.rtol * scale
        zero_pair = (c == 0.0) & (self.prev == 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = c / self.prev
        stable = (
            (ratio > 0.0) & (ratio < 0.98)
            & (np.abs(ratio - self.prev_ratio) * np.abs(c)
               <= 1e-13 * scale * (1.0 - ratio) ** 2)
        )
        tail_est = np.where(stable, c * ratio / np.where(stable, 1.0 - ratio, 1.0), 0.0)
        finish_small = active & ((small & small_prev) | zero_pair)
        finish_geo = active & ~finish_small & stable
        total = total + np.where(finish_geo, tail_est, 0.0)
        self.tail = np.where(finish_geo, tail_est, self.tail)
        self.done |= finish_small | finish_geo
        nondecay = (ratio >= 1.0 - 1e-9) & ~small
        self.flat = np.where(active & nondecay, self.flat + 1, 0)
        if self.count >= 20 and np.any(self.flat >= 6):
            raise DivergenceError(
                f"panel contributions do not decay towards the {self.end} end "
                f"of the integration range", self.end)
        self.prev = np.where(active, c, self.prev)
        self.prev_ratio = np.where(active, ratio, self.prev_ratio)
        return total


def integrate_dt_over_t(g, lo=0.0, hi=np.inf, breakpoints=(), rtol=1e-14,
                        panels_per_decade=1, rule=GL16, info=None,
                        chunk=8):
    """Integrate ``∫_lo^hi g(t) dt/t`` by log-panel Gauss--Legendre.

    Parameters
    ----------
    g : callable
        Vectorized integrand.  Receives a 1-D array of nodes ``t`` and
        returns an array whose last axis has the same length.
    lo, hi : float
        Integration limits with ``0 <= lo < hi <= inf``.
    breakpoints : sequence of float
        Points where the integrand has kinks; panels are split there.
    rtol : float
        Relative truncation threshold for the tails.
    panels_per_decade : int
        Panel density in the core region and the tails.
    info : QuadratureInfo, optional
        Filled with diagnostics when provided.

    Returns
    -------
    float or ndarray
        The integral, with the batch shape of ``g``.

    Raises
    ------
    DivergenceError
        If a tail does not decay.
    """
    if not (0.0 <= lo < hi):
        raise ValueError(f"invalid integration limits ({lo}, {hi})")
    ppd = int(panels_per_decade)
    bps = np.log10(np.asarray([b for b in breakpoints if lo < b < hi and b > 0],
                              dtype=float))
    anchor = np.concatenate([[0.0], bps])
    lo10 = np.log10(lo) if lo > 0 else -np.inf
    hi10 = np.log10(hi) if np.isfinite(hi) else np.inf
    c_lo = max(np.floor(anchor.min()) - 1.0, lo10)
    c_hi = min(np.ceil(anchor.max()) + 1.0, hi10)
    if c_lo >= c_hi:
        # the whole range lies on one side of the anchors
        if np.isfinite(hi10):
            c_hi, c_lo = hi10, max(hi10 - 1.0, lo10)
        else:
            c_lo, c_hi = lo10, min(lo10 + 1.0, hi10)
    edges = _core_edges(c_lo, c_hi, bps, ppd)
    core = _panel_values(g, edges, rule)
    batch_shape = core.shape[:-1]
    core = core.reshape(-1, core.shape[-1])
    total = np.sum(core, axis=-1)
    n_panels = core.shape[-1]

    step = 1.0 / ppd
    ext = {}
    for end, start, limit, sign in (("upper", c_hi, hi10, 1.0),
                                    ("lower", c_lo, lo10, -1.0)):
        pos = start
        hard = min(limit, _LOG10_TMAX) if sign > 0 else max(limit, _LOG10_TMIN)
        tail = _Tail(total.size, rtol, end)
        while not np.all(tail.done) and pos != hard:
            nxt = pos + sign * step * np.arange(1, chunk + 1)
            nxt = np.minimum(nxt, hard) if sign > 0 else np.maximum(nxt, hard)
            nxt = np.unique(nxt)
            nxt = nxt if sign > 0 else nxt[::-1]
            e = np.concatenate([[pos], nxt])
            if sign > 0:
                vals = _panel_values(g, e, rule)
            else:
                vals = _panel_values(g, e[::-1], rule)[..., ::-1]
            vals = vals.reshape(total.size, -1)
            for j in range(vals.shape[-1]):
                total = tail.update(vals[:, j], total)
                n_panels += 1
                if np.all(tail.done):
                    break
            pos = nxt[-1]
        if not np.all(tail.done) and np.isfinite(limit) and pos == limit:
            tail.done[:] = True
        if not np.all(tail.done):
            raise DivergenceError(
                f"tail towards the {end} end did not converge before "
                f"t=1e{int(hard)}", end)
        ext[end] = (pos, tail.tail)
    if info is not None:
        info.n_panels = n_panels
        info.log10_lo = ext["lower"][0]
        info.log10_hi = ext["upper"][0]
        info.lower_tail = float(np.max(np.abs(ext["lower"][1])))
        info.upper_tail = float(np.max(np.abs(ext["upper"][1])))
    total = total.reshape(batch_shape)
    return float(total) if total.ndim == 0 else total


def integrate_dt(g, lo=0.0, hi=np.inf, **kwargs):
    """Integrate ``∫_lo^hi g(t) dt`` with the log-panel engine."""
    return integrate_dt_over_t(lambda t: np.asarray(g(t)) * t, lo, hi, **kwargs)


def gauss_legendre_cells(f, edges, rule=GL16):
    """Integrate ``f`` over consecutive cells ``[edges[i], edges[i+1]]``.

    Uses the linear variable; intended for cells away from singularities.
    Returns one value per cell.
    """
    edges = np.asarray(edges, dtype=float)
    a = edges[:-1]
    b = edges[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid[:, None] + half[:, None] * rule.nodes[None, :]
    vals = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    return np.sum(vals * rule.weights, axis=-1) * half
