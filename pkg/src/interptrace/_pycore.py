"""Pure numpy implementations of the hot loops.

These are the reference versions of the routines in ``_core.pyx``; the
package falls back to them when the compiled extension is unavailable.
"""

import numpy as np


def toeplitz_lower(w, g):
    """``out[n] = Σ_{k=0}^{n} w[n-k] g[k]`` (lower-triangular Toeplitz product)."""
    w = np.ascontiguousarray(w, dtype=float)
    g = np.ascontiguousarray(g, dtype=float)
    return np.convolve(w, g)[: g.size]


def maximal_all(x, P):
    """Uncentered maximal averages at every node.

    ``out[k] = max over i <= k <= j, i < j of (P[j] - P[i]) / (x[j] - x[i])``
    where ``P`` is a prefix integral sampled at the nodes ``x``.  The sweep
    runs k downwards while ``R[i]`` keeps the best average of an interval
    starting at node i and ending at or after node k.
    """
    x = np.asarray(x, dtype=float)
    P = np.asarray(P, dtype=float)
    n = x.size
    R = np.full(n, -np.inf)
    out = np.empty(n)
    for k in range(n - 1, -1, -1):
        if k > 0:
            np.maximum(R[:k], (P[k] - P[:k]) / (x[k] - x[:k]), out=R[:k])
        out[k] = R[: k + 1].max()
    return out


def kfunc_linf(absa, c, d, t, iters=200):
    """Exact K-functional of a weighted ℓ∞ couple at each ``t``.

    Minimizes ``M0 + t M1`` subject to ``absa[k] <= c[k] M0 + d[k] M1`` by
    ternary search on the convex function ``h(M0) = M0 + t max_k
    ((absa[k] - c[k] M0)^+ / d[k])``.
    """
    absa = np.asarray(absa, dtype=float)
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if absa.size == 0 or np.all(absa == 0):
        return np.zeros(t.shape)
    hi0 = np.max(absa / c)

    def h(m0):
        m1 = np.max(np.maximum(absa[None, :] - c[None, :] * m0[:, None], 0.0)
                    / d[None, :], axis=1)
        return m0 + t * m1

    lo = np.zeros(t.shape)
    hi = np.full(t.shape, hi0)
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        left = h(m1) <= h(m2)
        hi = np.where(left, m2, hi)
        lo = np.where(left, lo, m1)
        if np.all(hi - lo <= 1e-17 * hi0):
            break
    cand = np.stack([h(lo), h(hi), h(0.5 * (lo + hi)), h(np.zeros(t.shape)),
                     h(np.full(t.shape, hi0))])
    return cand.min(axis=0)
