"""Product integration on uniform grids.

For a kernel k with primitive ``K(u) = ∫₀^u k`` and first moment
``M(u) = ∫₀^u s k(s) ds`` and a function g that is piecewise linear on the
grid ``s_j = j h``, the convolution ``∫₀^{t_n} k(t_n - s) g(s) ds`` is

    conv_n = Σ_{j=0}^{n} ω_{n-j} g_j - B_n g_0,

where on the panel ``u ∈ [m h, (m+1) h]`` we set ``A_m = ΔK`` and
``B_m = ((m+1) h ΔK - ΔM)/h``, and ``ω_0 = B_0``,
``ω_i = A_{i-1} - B_{i-1} + B_i``.  The kernel singularity at ``u = 0`` is
integrated exactly through K and M.
"""

from dataclasses import dataclass

import numpy as np

from . import core

__all__ = ["ProductWeights", "product_weights", "stieltjes_weights", "trapezoid_cumulative",
           "product_endpoint", "stieltjes_endpoint", "trapezoid_coefficients", "graded_grid"]


@dataclass(frozen=True)
class ProductWeights:
    """Toeplitz weights of one kernel on one uniform grid."""

    h: float
    omega: np.ndarray
    B: np.ndarray

    def convolve(self, g):
        """``conv_n`` for every grid index n (g sampled at ``j h``)."""
        g = np.asarray(g, dtype=float)
        m = g.shape[0]
        if g.ndim == 1:
            return core.toeplitz_lower(self.omega[:m], g) - self.B[:m] * g[0]
        out = np.empty_like(g)
        for c in range(g.shape[1]):
            out[:, c] = core.toeplitz_lower(self.omega[:m], g[:, c]) - self.B[:m] * g[0, c]
        return out

    def endpoint(self, g):
        """``conv_n`` for the last index only (O(n))."""
        g = np.asarray(g, dtype=float)
        n = g.shape[0] - 1
        return np.tensordot(self.omega[n::-1], g, axes=(0, 0)) - self.B[n] * g[0]


def product_weights(primitive, moment, h, M):
    """Weights for grids with ``M + 1`` points and spacing ``h``."""
    u = h * np.arange(M + 2)
    K = np.asarray(primitive(u), dtype=float)
    Mo = np.asarray(moment(u), dtype=float)
    A = np.diff(K)
    B = (u[1:] * A - np.diff(Mo)) / h
    omega = np.empty(M + 1)
    omega[0] = B[0]
    omega[1:] = A[:M] - B[:M] + B[1:M + 1]
    return ProductWeights(float(h), omega, B[:M + 1])


def stieltjes_weights(primitive, h, M):
    """Coefficients ``c_j`` with ``∫₀^{Mh} k(Mh - s) dF(s) ≈ Σ_j c_j (F_{j+1} - F_j)``.

    F is taken piecewise linear, so ``c_j`` is the average of k over the
    panel ``[(M-j-1) h, (M-j) h]``.
    """
    u = h * np.arange(M + 1)
    K = np.asarray(primitive(u), dtype=float)
    dK = np.diff(K)            # integral over [m h, (m+1) h]
    return dK[::-1] / h        # index j ↔ m = M - 1 - j


def trapezoid_cumulative(g, h):
    """``∫₀^{jh} g`` by the trapezoid rule on a uniform grid."""
    g = np.asarray(g, dtype=float)
    out = np.zeros_like(g)
    out[1:] = np.cumsum(0.5 * h * (g[1:] + g[:-1]), axis=0)
    return out


def product_endpoint(primitive, moment, s, g, t=None):
    """``∫_{s_0}^{t} k(t - s) g(s) ds`` for g piecewise linear on a grid.

    ``s`` may be nonuniform; ``t`` defaults to ``s[-1]``.  On each panel the
    integral of the kernel against the linear interpolant is formed from
    increments of the primitive K and the moment M, so the endpoint
    singularity of k is integrated exactly.  The trailing axes of ``g``
    are batch axes.
    """
    s = np.asarray(s, dtype=float)
    g = np.asarray(g, dtype=float)
    t = float(s[-1]) if t is None else float(t)
    b = t - s[:-1]
    a = t - s[1:]
    dK = np.asarray(primitive(b), dtype=float) - np.asarray(primitive(a), dtype=float)
    dM = np.asarray(moment(b), dtype=float) - np.asarray(moment(a), dtype=float)
    delta = np.diff(s)
    lin = (b * dK - dM) / delta
    c0 = dK - lin          # multiplies g_j
    c1 = lin               # multiplies g_{j+1}
    coef = np.zeros(s.shape[0])
    coef[:-1] += c0
    coef[1:] += c1
    return np.tensordot(coef, g, axes=(0, 0)), coef


def stieltjes_endpoint(primitive, s, F, t=None):
    """``∫_{s_0}^{t} k(t - s) dF(s)`` for F piecewise linear on a grid.

    Returns the value and the per-increment coefficients (the mean of k
    over each panel).
    """
    s = np.asarray(s, dtype=float)
    F = np.asarray(F, dtype=float)
    t = float(s[-1]) if t is None else float(t)
    dK = (np.asarray(primitive(t - s[:-1]), dtype=float)
          - np.asarray(primitive(t - s[1:]), dtype=float))
    c = dK / np.diff(s)
    return np.tensordot(c, np.diff(F, axis=0), axes=(0, 0)), c


def trapezoid_coefficients(s):
    """Trapezoid weights on an arbitrary grid."""
    s = np.asarray(s, dtype=float)
    d = np.diff(s)
    w = np.zeros(s.shape[0])
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def graded_grid(t, M):
    """Cosine-graded grid on ``[0, t]``, clustered quadratically at both
    ends where the resolvent and the reflected kernel are singular."""
    return 0.5 * float(t) * (1.0 - np.cos(np.pi * np.arange(M + 1) / M))
