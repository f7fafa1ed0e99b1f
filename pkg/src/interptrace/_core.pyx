# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_pycore``.

Each routine has the same signature and semantics as its numpy twin.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def toeplitz_lower(w, g):
    """``out[n] = Σ_{k=0}^{n} w[n-k] g[k]``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wa = np.ascontiguousarray(w, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ga = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t m = ga.shape[0]
    cdef Py_ssize_t nw = wa.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(m, dtype=np.float64)
    cdef double[::1] wv = wa
    cdef double[::1] gv = ga
    cdef double[::1] ov = out
    cdef Py_ssize_t n, k, lo
    cdef double acc
    for n in range(m):
        acc = 0.0
        lo = n - nw + 1
        if lo < 0:
            lo = 0
        for k in range(lo, n + 1):
            acc += wv[n - k] * gv[k]
        ov[n] = acc
    return out


def maximal_all(x, P):
    """Uncentered maximal averages at every node (see ``_pycore``)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pa = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t n = xa.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] R = np.full(n, -np.inf)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double[::1] xv = xa
    cdef double[::1] pv = pa
    cdef double[::1] rv = R
    cdef double[::1] ov = out
    cdef Py_ssize_t i, k
    cdef double avg, best
    for k in range(n - 1, -1, -1):
        best = -INFINITY
        for i in range(k):
            avg = (pv[k] - pv[i]) / (xv[k] - xv[i])
            if avg > rv[i]:
                rv[i] = avg
            if rv[i] > best:
                best = rv[i]
        if rv[k] > best:
            best = rv[k]
        ov[k] = best
    return out


cdef inline double _h(double m0, double t, double[::1] a, double[::1] c,
                      double[::1] d, Py_ssize_t n) nogil:
    cdef double m1 = 0.0
    cdef double v
    cdef Py_ssize_t k
    for k in range(n):
        v = (a[k] - c[k] * m0) / d[k]
        if v > m1:
            m1 = v
    return m0 + t * m1


def kfunc_linf(absa, c, d, t, int iters=200):
    """Exact K-functional of a weighted ℓ∞ couple (see ``_pycore``)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] aa = np.ascontiguousarray(absa, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ca = np.ascontiguousarray(c, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] da = np.ascontiguousarray(d, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ta = np.ascontiguousarray(np.atleast_1d(t), dtype=np.float64)
    cdef Py_ssize_t n = aa.shape[0]
    cdef Py_ssize_t nt = ta.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(nt)
    if n == 0 or not np.any(aa != 0):
        return out
    cdef double[::1] av = aa
    cdef double[::1] cv = ca
    cdef double[::1] dv = da
    cdef double[::1] tv = ta
    cdef double[::1] ov = out
    cdef double hi0 = float(np.max(aa / ca))
    cdef double lo, hi, m1, m2, tt, best, v
    cdef Py_ssize_t j, it
    with nogil:
        for j in range(nt):
            tt = tv[j]
            lo = 0.0
            hi = hi0
            for it in range(iters):
                m1 = lo + (hi - lo) / 3.0
                m2 = hi - (hi - lo) / 3.0
                if _h(m1, tt, av, cv, dv, n) <= _h(m2, tt, av, cv, dv, n):
                    hi = m2
                else:
                    lo = m1
                if hi - lo <= 1e-17 * hi0:
                    break
            best = _h(lo, tt, av, cv, dv, n)
            v = _h(hi, tt, av, cv, dv, n)
            if v < best:
                best = v
            v = _h(0.5 * (lo + hi), tt, av, cv, dv, n)
            if v < best:
                best = v
            v = _h(0.0, tt, av, cv, dv, n)
            if v < best:
                best = v
            v = _h(hi0, tt, av, cv, dv, n)
            if v < best:
                best = v
            ov[j] = best
    return out
