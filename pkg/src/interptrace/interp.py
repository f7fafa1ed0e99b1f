"""Generalized real interpolation: K and J functionals and their norms.

For a couple ``(A₀, A₁)`` and a parameter φ in ``I_o(0, 1)`` the K-method
norm is

    Φ_p^φ(K(·, a)) = (∫₀^∞ (φ(1/t) K(t, a))^p dt/t)^{1/p},

with ``K(t, a) = inf_{a = a₀ + a₁} ‖a₀‖_{A₀} + t ‖a₁‖_{A₁}``.  Its dyadic
version samples ``φ(2^{-j}) K(2^j, a)``, and the J-method version uses a
decomposition ``a = Σ u_j`` with ``J(t, u) = max(‖u‖_{A₀}, t ‖u‖_{A₁})``.

Three concrete couples are provided.

``SequenceCouple``
    Weighted sequence spaces ``ℓ_{q}^{σ}`` with norm
    ``(Σ_j (2^{jσ} |a_j|)^q)^{1/q}`` on indices ``j ∈ [−J, J]``.
``LebesgueCouple``
    ``(L₁, L∞)`` on step functions of ``[0, ∞)``; ``K(t, f) = ∫₀^t f*``.
``BesovCouple``
    Periodic Besov spaces ``B^{s_i}_{p,1}(w)`` built from a smooth
    Littlewood--Paley partition; K is bracketed from above and below.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import core
from .errors import (DomainError, GridError, ParameterError, PreconditionError,
                     TruncationError, UnsupportedError)
from .quadrature import integrate_dt_over_t
from .reports import EquivalenceReport
from .scaling import ScalingFunction, certify

__all__ = [
    "SequenceCouple",
    "LebesgueCouple",
    "BesovCouple",
    "k_functional",
    "k_bracket",
    "phi_norm_integral",
    "dyadic_norm",
    "j_norm_upper",
    "sequence_space_norm",
    "sequence_identity_check",
    "lorentz_norm",
    "lorentz_identity_check",
    "besov_norm",
    "lp_partition",
    "embedding_chain_check",
    "cap_bound_check",
    "stability_check",
    "random_sparse",
]


def _arr(x):
    return np.asarray(x, dtype=float)


def _lq(x, q):
    x = np.abs(np.asarray(x))
    if x.size == 0:
        return 0.0
    if math.isinf(q):
        return float(np.max(x))
    return float(np.sum(x ** q) ** (1.0 / q))


# ---------------------------------------------------------------------------
# couples


@dataclass(frozen=True)
class SequenceCouple:
    """``(ℓ_{q₀}^{σ₀}, ℓ_{q₁}^{σ₁})`` on indices ``j ∈ [−J, J]``.

    Elements are arrays of length ``2J + 1`` (index j at position
    ``j + J``); a trailing axis holds vector-valued coordinates, measured
    with the Euclidean norm.
    """

    q0: float
    sigma0: float
    q1: float
    sigma1: float
    J: int = 20
    kind: str = field(default="sequence", init=False)

    def __post_init__(self):
        if self.q0 < 1 or self.q1 < 1:
            raise ParameterError("sequence exponents must be at least 1")

    @property
    def indices(self):
        return np.arange(-self.J, self.J + 1)

    def unit(self, k, scale=1.0):
        """Unit vector ``e_k``."""
        if abs(k) > self.J:
            raise DomainError(f"index {k} outside [−{self.J}, {self.J}]")
        a = np.zeros(2 * self.J + 1)
        a[k + self.J] = scale
        return a

    def embed(self, a, J):
        """Zero-pad an element of this couple into a couple with range J."""
        a = np.asarray(a)
        pad = int(J) - self.J
        if pad < 0:
            raise DomainError("target range is smaller")
        return np.pad(a, [(pad, pad)] + [(0, 0)] * (a.ndim - 1))

    def with_range(self, J):
        return SequenceCouple(self.q0, self.sigma0, self.q1, self.sigma1, int(J))

    def magnitudes(self, a):
        a = np.asarray(a)
        if a.ndim == 1:
            return np.abs(a).astype(float)
        return np.linalg.norm(a.reshape(a.shape[0], -1), axis=1)

    def norm0(self, a):
        return _lq(2.0 ** (self.indices * self.sigma0) * self.magnitudes(a), self.q0)

    def norm1(self, a):
        return _lq(2.0 ** (self.indices * self.sigma1) * self.magnitudes(a), self.q1)

    def batch_norm(self, X, which):
        """Norms in ``A_which`` of the rows of X (shape ``(n, 2J+1, ...)``)."""
        X = np.asarray(X)
        mag = np.abs(X) if X.ndim == 2 else np.linalg.norm(
            X.reshape(X.shape[0], X.shape[1], -1), axis=2)
        sigma, q = (self.sigma0, self.q0) if which == 0 else (self.sigma1, self.q1)
        y = mag * 2.0 ** (self.indices * sigma)[None, :]
        if math.isinf(q):
            return np.max(y, axis=1)
        return np.sum(y ** q, axis=1) ** (1.0 / q)

    @property
    def embedding_constant(self):
        """N with ``‖a‖_{A₁} ≤ N ‖a‖_{A₀}`` on the index range, or None.

        Available for ``σ₀ ≥ σ₁`` and ``q₀ ≤ q₁``; the constant is
        ``2^{J(σ₀−σ₁)}`` because the range includes negative indices.
        """
        if self.sigma0 >= self.sigma1 and self.q0 <= self.q1:
            return float(2.0 ** (self.J * (self.sigma0 - self.sigma1)))
        return None

    @property
    def exact(self):
        """True when K is computed exactly (``q₀ = q₁ ∈ {1, ∞}``)."""
        return self.q0 == self.q1 and (self.q0 == 1 or math.isinf(self.q0))

    def kinks(self, a):
        m = self.magnitudes(a)
        j = self.indices[m > 0]
        d = self.sigma0 - self.sigma1
        if d == 0:
            return ()
        return tuple(np.exp2(j * d))

    def k(self, t, a):
        """K(t, a); exact for ``q₀ = q₁ ∈ {1, ∞}``, otherwise the best
        split of whole coordinates at a threshold of ``2^{j(σ₀−σ₁)}`` (an
        upper bound)."""
        t = np.atleast_1d(_arr(t))
        m = self.magnitudes(a)
        nz = m > 0
        if not np.any(nz):
            return np.zeros(t.shape)
        j = self.indices[nz]
        m = m[nz]
        w0 = 2.0 ** (j * self.sigma0)
        w1 = 2.0 ** (j * self.sigma1)
        if self.q0 == 1 and self.q1 == 1:
            return np.sum(np.minimum(w0[None, :], t[:, None] * w1[None, :]) * m[None, :], axis=1)
        if math.isinf(self.q0) and math.isinf(self.q1):
            return core.kfunc_linf(m, 1.0 / w0, 1.0 / w1, t)
        # whole coordinates go to A₀ below a threshold of w₀/w₁ and to A₁
        # above it; the best threshold covers both one-sided decompositions
        order = np.argsort(w0 / w1, kind="stable")
        x0, x1 = (w0 * m)[order], (w1 * m)[order]
        if math.isinf(self.q0):
            n0 = np.concatenate([[0.0], np.maximum.accumulate(x0)])
        else:
            n0 = np.concatenate([[0.0], np.cumsum(x0 ** self.q0)]) ** (1.0 / self.q0)
        if math.isinf(self.q1):
            n1 = np.concatenate([np.maximum.accumulate(x1[::-1])[::-1], [0.0]])
        else:
            n1 = np.concatenate([np.cumsum((x1 ** self.q1)[::-1])[::-1], [0.0]]) ** (1.0 / self.q1)
        return np.min(n0[None, :] + t[:, None] * n1[None, :], axis=1)

    def canonical_blocks(self, a):
        """Coordinate blocks ``u_m`` placed at ``t = 2^m`` with
        ``m = round(j (σ₀ − σ₁))``."""
        a = np.asarray(a)
        d = self.sigma0 - self.sigma1
        blocks = {}
        for pos, j in enumerate(self.indices):
            if self.magnitudes(a[pos:pos + 1])[0] == 0:
                continue
            m = int(round(j * d))
            u = blocks.setdefault(m, np.zeros_like(a, dtype=float if not np.iscomplexobj(a)
                                                   else complex))
            u[pos] = a[pos]
        return blocks


@dataclass(frozen=True)
class LebesgueCouple:
    """``(L₁, L∞)`` on ``[0, ∞)`` for step functions.

    An element is a :class:`GridFunction` whose ``values[i]`` is the value
    on ``[grid[i], grid[i+1])``; the last value is ignored.
    """

    kind: str = field(default="lebesgue_L1_Linf", init=False)

    @staticmethod
    def cells(f):
        m = np.diff(f.grid)
        v = np.abs(f.values[:-1]) if f.is_scalar else f.pointwise_norm()[:-1]
        return v, m

    def rearrangement(self, f):
        """Breakpoints ``s`` and levels ``h`` of ``f*`` (``f* = h[i]`` on
        ``[s[i], s[i+1])``)."""
        v, m = self.cells(f)
        keep = (v > 0) & (m > 0)
        v, m = v[keep], m[keep]
        order = np.argsort(-v, kind="stable")
        v, m = v[order], m[order]
        s = np.concatenate([[0.0], np.cumsum(m)])
        return s, v

    def norm0(self, f):
        v, m = self.cells(f)
        return float(np.sum(v * m))

    def norm1(self, f):
        v, _ = self.cells(f)
        return float(np.max(v)) if v.size else 0.0

    exact = True
    embedding_constant = None

    def kinks(self, f):
        s, _ = self.rearrangement(f)
        return tuple(s[1:])

    def k(self, t, f):
        t = np.atleast_1d(_arr(t))
        s, h = self.rearrangement(f)
        if h.size == 0:
            return np.zeros(t.shape)
        P = np.concatenate([[0.0], np.cumsum(h * np.diff(s))])
        return np.interp(t, s, P, right=P[-1])

    def fstar(self, f, t):
        s, h = self.rearrangement(f)
        t = _arr(t)
        if h.size == 0:
            return np.zeros(t.shape)
        i = np.searchsorted(s, t, side="right") - 1
        return np.where(i < h.size, h[np.clip(i, 0, h.size - 1)], 0.0)

    def canonical_blocks(self, f):
        """Layer-cake slices between the levels ``f*(2^j)``."""
        s, h = self.rearrangement(f)
        if h.size == 0:
            return {}
        v, m = self.cells(f)
        total = s[-1]
        j_lo = int(math.floor(math.log2(max(np.min(np.diff(s)), 1e-300)))) - 1
        j_hi = int(math.ceil(math.log2(total))) + 1
        levels = {j: float(self.fstar(f, 2.0 ** j)) for j in range(j_lo, j_hi + 2)}
        top = float(h[0])
        blocks = {}
        for j in range(j_lo, j_hi + 1):
            upper = top if j == j_lo else levels[j]
            lower = levels[j + 1]
            sl = np.minimum(v, upper) - np.minimum(v, lower)
            if np.any(sl > 0):
                blocks[j] = (sl, m)
        return blocks


def _chi(x):
    """Smooth cutoff: 1 on ``|x| ≤ 1``, 0 on ``|x| ≥ 2``."""
    x = np.abs(_arr(x))

    def h(y):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)

    a = h(2.0 - x)
    b = h(x - 1.0)
    return a / (a + b)


def lp_partition(xi, j):
    """Multiplier ``Ψ(2^{-j} ξ)`` with ``Ψ(ξ) = χ(ξ) − χ(2ξ)`` for ``j ≥ 1``
    and ``χ(ξ)`` for ``j = 0``."""
    xi = _arr(xi)
    if j == 0:
        return _chi(xi)
    y = xi / 2.0 ** j
    return _chi(y) - _chi(2.0 * y)


@dataclass(frozen=True)
class BesovCouple:
    """Periodic ``(B^{s₀}_{p,1}(w), B^{s₁}_{p,1}(w))`` on N grid points.

    Elements are the N discrete Fourier coefficients ``c = fft(f)/N`` in
    numpy order.  ``L_p(w)`` uses the normalized measure ``dx/2π``.
    """

    p: float
    s0: float
    s1: float
    N: int = 256
    weight: object = None
    kind: str = field(default="besov_periodic", init=False)

    def __post_init__(self):
        N = int(self.N)
        if N < 4 or N & (N - 1):
            raise GridError(f"N must be a power of two, got {self.N}")
        if self.p < 1:
            raise ParameterError("p must be at least 1")

    exact = False

    @property
    def embedding_constant(self):
        """``‖f‖_{A₁} ≤ ‖f‖_{A₀}`` when ``s₀ ≥ s₁``; None otherwise."""
        return 1.0 if self.s0 >= self.s1 else None

    @property
    def x(self):
        return 2.0 * math.pi * np.arange(self.N) / self.N

    @property
    def xi(self):
        return np.fft.fftfreq(self.N, 1.0 / self.N)

    @property
    def w(self):
        if self.weight is None:
            return np.ones(self.N)
        return _arr(self.weight(self.x))

    @property
    def j_max(self):
        return int(math.log2(self.N // 2)) + 1

    def from_samples(self, f):
        return np.fft.fft(np.asarray(f, dtype=complex)) / self.N

    def to_samples(self, c):
        return np.fft.ifft(np.asarray(c) * self.N)

    def mode(self, k, amp=1.0):
        """Coefficients of ``amp · e^{i k x}``."""
        c = np.zeros(self.N, dtype=complex)
        c[int(k) % self.N] = amp
        return c

    def lp(self, samples, p=None, dual=False):
        """``‖g‖_{L_p(w)}``; with ``dual=True`` the norm of the dual space
        ``L_{p'}(w^{1-p'})``."""
        p = self.p if p is None else p
        w = self.w
        g = np.abs(samples)
        if dual:
            if p == 1:
                return float(np.max(g / w))
            q = p / (p - 1.0)
            return float(np.mean(g ** q * w ** (1.0 - q)) ** (1.0 / q))
        if math.isinf(p):
            return float(np.max(g))
        return float(np.mean(g ** p * w) ** (1.0 / p))

    def blocks(self, c):
        """``[S₀ f, Δ₁ f, ..., Δ_{jmax} f]`` as sample arrays."""
        c = np.asarray(c)
        return [self.to_samples(lp_partition(self.xi, j) * c) for j in range(self.j_max + 1)]

    def block_norms(self, c):
        return np.array([self.lp(b) for b in self.blocks(c)])

    def reconstruction_error(self, c):
        """``‖S₀f + Σ Δ_j f − f‖`` in ``L_p(w)``."""
        return self.lp(sum(self.blocks(c)) - self.to_samples(c))

    def _norm(self, c, s):
        n = self.block_norms(c)
        j = np.arange(n.size)
        return float(np.sum(2.0 ** (j * s) * n))

    def norm0(self, c):
        return self._norm(c, self.s0)

    def norm1(self, c):
        return self._norm(c, self.s1)

    def kinks(self, c):
        return ()

    def _dual_norm(self, g_samples, s):
        gc = self.from_samples(g_samples)
        best = 0.0
        for j in range(self.j_max + 1):
            mult = sum(lp_partition(self.xi, i) for i in (j - 1, j, j + 1)
                       if 0 <= i <= self.j_max)
            best = max(best, 2.0 ** (-j * s) * self.lp(self.to_samples(mult * gc), dual=True))
        return best

    def _split(self, c, m, low_to_0=True):
        mult = sum(lp_partition(self.xi, j) for j in range(m)) if m > 0 else 0.0 * self.xi
        lo = mult * c
        hi = c - lo
        return (lo, hi) if low_to_0 else (hi, lo)

    def k_bracket(self, t, c):
        """``(lower, upper)`` bounds of K(t, f) at each t.

        Upper: the best frequency-threshold split ``f = f₀ + f₁`` in either
        orientation.  Lower: ``|⟨f, g⟩| / max(N₀*(g), N₁*(g)/t)`` over test
        functions g built from f (its norming functional and its low and
        high frequency parts), where ``N_i*`` bounds the dual norm of
        ``A_i`` through ``sup_j 2^{-j s_i} ‖Ψ̃_j g‖``.
        """
        t = np.atleast_1d(_arr(t))
        c = np.asarray(c, dtype=complex)
        f = self.to_samples(c)
        splits = []
        for m in range(self.j_max + 2):
            for o in (True, False):
                a0, a1 = self._split(c, m, o)
                splits.append((self.norm0(a0), self.norm1(a1)))
        n0 = np.array([s[0] for s in splits])
        n1 = np.array([s[1] for s in splits])
        upper = np.min(n0[None, :] + t[:, None] * n1[None, :], axis=1)
        tests = []
        p = self.p
        base = np.abs(f) ** (p - 2.0) * f * self.w if p != 2 else f * self.w
        base = np.nan_to_num(base)
        for m in range(self.j_max + 2):
            lo, hi = self._split(self.from_samples(base), m, True)
            for g in (lo, hi):
                gs = self.to_samples(g)
                if np.any(gs != 0):
                    tests.append(gs)
        lower = np.zeros(t.shape)
        for g in tests:
            pair = abs(np.mean(f * np.conj(g)))
            d0 = self._dual_norm(g, self.s0)
            d1 = self._dual_norm(g, self.s1)
            if d0 == 0 and d1 == 0:
                continue
            lower = np.maximum(lower, pair / np.maximum(d0, d1 / t))
        return lower, upper

    def k(self, t, c):
        """Upper bound of K(t, f); see :meth:`k_bracket`."""
        return self.k_bracket(t, c)[1]

    def canonical_blocks(self, c):
        """Littlewood--Paley blocks placed at ``t = 2^{round(j (s₀−s₁))}``."""
        c = np.asarray(c, dtype=complex)
        out = {}
        for j in range(self.j_max + 1):
            b = lp_partition(self.xi, j) * c
            if np.any(b != 0):
                out[int(round(j * (self.s0 - self.s1)))] = b
        return out


# ---------------------------------------------------------------------------
# K functional and its norms


def k_functional(couple, t, a):
    """K(t, a) for the couple (upper bound for Besov couples)."""
    t = _arr(t)
    if np.any(t <= 0):
        raise DomainError("K(t, a) needs t > 0")
    out = couple.k(t, a)
    return float(out[0]) if t.ndim == 0 else out


def k_bracket(couple, t, a):
    """``(lower, upper)`` bracket of K; equal for exact couples."""
    t = _arr(t)
    if np.any(t <= 0):
        raise DomainError("K(t, a) needs t > 0")
    if isinstance(couple, BesovCouple):
        return couple.k_bracket(t, a)
    v = couple.k(t, a)
    return v, v


_CERTIFIED = {}


def _certify(phi):
    key = id(phi)
    if _CERTIFIED.get(key) is not phi:
        certify(phi, (0.0, 1.0))
        _CERTIFIED[key] = phi


def _is_zero(couple, a):
    if isinstance(couple, LebesgueCouple):
        return couple.norm1(a) == 0
    return not np.any(np.asarray(a) != 0)


def phi_norm_integral(couple, phi, p, a, bracket=False, rtol=1e-14):
    """``Φ_p^φ(K(·, a))`` by log-panel quadrature.

    Panels are split at the kinks of K.  For Besov couples the upper K is
    used (``bracket=True`` returns ``(lower, upper)``).

    Raises
    ------
    PreconditionError
        If φ is not certified in ``I_o(0, 1)``.
    """
    _certify(phi)
    p = float(p)
    if _is_zero(couple, a):
        return (0.0, 0.0) if bracket else 0.0
    kinks = couple.kinks(a)
    ppd = 4 if isinstance(couple, BesovCouple) else 2

    def run(kf):
        g = lambda t: (phi(1.0 / t) * kf(t)) ** p
        v = integrate_dt_over_t(g, breakpoints=kinks, panels_per_decade=ppd, rtol=rtol)
        return float(v) ** (1.0 / p)

    if bracket and isinstance(couple, BesovCouple):
        return (run(lambda t: couple.k_bracket(t, a)[0]), run(lambda t: couple.k(t, a)))
    val = run(lambda t: couple.k(t, a))
    return (val, val) if bracket else val


def dyadic_norm(couple, phi, p, a, J=60, J_max=4096, tol=1e-12):
    """``‖(φ(2^{-j}) K(2^j, a))_j‖_{ℓ_p}`` over ``j ∈ [−J, J]``.

    J is doubled until both boundary terms carry less than ``tol`` of the
    p-th power sum.

    Raises
    ------
    TruncationError
        If the boundary terms are still significant at ``J_max``.
    """
    p = float(p)
    if _is_zero(couple, a):
        return 0.0
    J = int(J)
    while True:
        j = np.arange(-J, J + 1)
        t = np.exp2(j.astype(float))
        alpha = _arr(phi(1.0 / t)) * couple.k(t, a)
        s = np.sum(alpha ** p)
        if alpha[0] ** p <= tol * s and alpha[-1] ** p <= tol * s:
            return float(s ** (1.0 / p))
        if J >= J_max:
            raise TruncationError(
                f"dyadic boundary terms not negligible at J={J}; a larger J is needed")
        J = min(2 * J, J_max)


def _j_value(couple, u, t):
    if isinstance(couple, LebesgueCouple):
        sl, m = u
        return max(float(np.sum(sl * m)), t * float(np.max(sl)))
    return max(couple.norm0(u), t * couple.norm1(u))


def j_norm_upper(couple, phi, p, a):
    """``‖(φ(2^{-m}) J(2^m, u_m))_m‖_{ℓ_p}`` for the canonical decomposition.

    Sequence couples use coordinate blocks, Lebesgue couples layer-cake
    slices at the levels ``f*(2^m)``, Besov couples Littlewood--Paley
    blocks.  The result bounds the J-method norm from above.
    """
    if not hasattr(couple, "canonical_blocks"):
        raise UnsupportedError(f"no canonical decomposition for {type(couple).__name__}")
    if _is_zero(couple, a):
        return 0.0
    blocks = couple.canonical_blocks(a)
    vals = [float(phi(2.0 ** -m)) * _j_value(couple, u, 2.0 ** m) for m, u in blocks.items()]
    return _lq(np.array(vals), float(p))


# ---------------------------------------------------------------------------
# closed-form identities


def sequence_space_norm(phi, q, sigma0, sigma1, a, J=None):
    """``(Σ_j (2^{jσ₀} φ(2^{-j(σ₀−σ₁)}) |a_j|)^q)^{1/q}``.

    ``a`` has length ``2J + 1`` with index j at position ``j + J``.
    """
    if sigma0 == sigma1:
        raise PreconditionError("σ₀ and σ₁ must differ")
    a = np.asarray(a)
    n = a.shape[0]
    J = (n - 1) // 2 if J is None else J
    j = np.arange(-J, J + 1).astype(float)
    mag = np.abs(a) if a.ndim == 1 else np.linalg.norm(a.reshape(n, -1), axis=1)
    wgt = 2.0 ** (j * sigma0) * _arr(phi(2.0 ** (-j * (sigma0 - sigma1))))
    return _lq(wgt * mag, float(q))


def random_sparse(rng, J, k=20, scale_range=(-3.0, 3.0)):
    """A random k-sparse vector with log-uniform magnitudes and signs."""
    a = np.zeros(2 * J + 1)
    idx = rng.choice(2 * J + 1, size=min(k, 2 * J + 1), replace=False)
    a[idx] = rng.choice([-1.0, 1.0], idx.size) * 10.0 ** rng.uniform(*scale_range, idx.size)
    return a


def sequence_identity_check(phi, q, sigma0, sigma1, n_vectors=100, sparsity=20, J=20,
                            seed=0, band_limit=50.0, drift_limit=0.05):
    """Sequence norm against the K-side norm on random sparse vectors.

    Both the ``(ℓ_∞, ℓ_∞)`` and the ``(ℓ_1, ℓ_1)`` realizations are used;
    the ratios ``‖a‖_{ℓ_q^{φ(σ₀,σ₁)}} / Φ_q^φ(K(·, a))`` form one band.
    The computation is repeated with the index range and dyadic range
    doubled (vectors zero-padded) to measure drift.
    """
    rng = np.random.default_rng(seed)
    vecs = [random_sparse(rng, J, sparsity) for _ in range(n_vectors)]

    def band(JJ):
        ratios = []
        for q0 in (math.inf, 1.0):
            c = SequenceCouple(q0, sigma0, q0, sigma1, JJ)
            base = SequenceCouple(q0, sigma0, q0, sigma1, J)
            for a in vecs:
                b = base.embed(a, JJ)
                s = sequence_space_norm(phi, q, sigma0, sigma1, b)
                k = phi_norm_integral(c, phi, q, b)
                ratios.append(s / k)
        return np.array(ratios)

    r1 = band(J)
    r2 = band(2 * J)
    drift = max(abs(r2.max() / r1.max() - 1.0), abs(r2.min() / r1.min() - 1.0))
    rep = EquivalenceReport.from_ratios(r1, drift, threshold=drift_limit,
                                        extra_ok=r1.max() / r1.min() < band_limit,
                                        details={"band_width": float(r1.max() / r1.min()),
                                                 "n": int(r1.size)})
    return rep


def lorentz_norm(phi, p, f):
    """``(∫₀^∞ (φ̃(t) f*(t))^p dt/t)^{1/p}`` with ``φ̃(t) = t φ(1/t)``."""
    c = LebesgueCouple()
    s, h = c.rearrangement(f)
    if h.size == 0:
        return 0.0
    p = float(p)
    g = lambda t: (t * phi(1.0 / t) * c.fstar(f, t)) ** p
    v = integrate_dt_over_t(g, 0.0, float(s[-1]), breakpoints=tuple(s[1:-1]),
                            panels_per_decade=4)
    return float(v) ** (1.0 / p)


def lorentz_identity_check(phi, p, functions, threshold=0.01):
    """Ratios of the Lorentz norm to the K-side norm over test functions."""
    c = LebesgueCouple()
    ratios = [lorentz_norm(phi, p, f) / phi_norm_integral(c, phi, p, f) for f in functions]
    return EquivalenceReport.from_ratios(ratios, 0.0, threshold)


def besov_norm(couple, q, c, phi=None, s=None):
    """``‖S₀f‖ + ‖(2^{j s₀} φ(2^{-j(s₀−s₁)}) ‖Δ_j f‖)_{j≥1}‖_{ℓ_q}``.

    With ``s`` instead of φ the factor is the classical ``2^{js}``.
    """
    n = couple.block_norms(c)
    j = np.arange(1, n.size).astype(float)
    if phi is not None:
        fac = 2.0 ** (j * couple.s0) * _arr(phi(2.0 ** (-j * (couple.s0 - couple.s1))))
    elif s is not None:
        fac = 2.0 ** (j * s)
    else:
        raise ParameterError("either φ or s is required")
    return float(n[0] + _lq(fac * n[1:], float(q)))


# ---------------------------------------------------------------------------
# structural checks


def embedding_chain_check(couple, phi, p0, p1, vectors):
    """Ratios along ``A₀+A₁ ↪ (·)_{φ,p₁} ↪ (·)_{φ,p₀} ↪ A₀∩A₁`` for
    ``p₀ ≤ p₁``.

    Returns the largest observed constant of each link.
    """
    if p0 > p1:
        raise ParameterError("need p₀ ≤ p₁")
    c1 = c2 = c3 = 0.0
    for a in vectors:
        if _is_zero(couple, a):
            continue
        s = float(couple.k(np.array([1.0]), a)[0])
        n1 = phi_norm_integral(couple, phi, p1, a)
        n0 = phi_norm_integral(couple, phi, p0, a)
        cap = max(couple.norm0(a), couple.norm1(a))
        c1 = max(c1, s / n1)
        c2 = max(c2, n1 / n0)
        c3 = max(c3, n0 / cap)
    return {"sum_over_p1": c1, "p1_over_p0": c2, "p0_over_intersection": c3}


def cap_bound_check(couple, phi, p, vectors):
    """Band of ``‖a‖_{φ,p} / (‖a‖_{A₀} φ(‖a‖_{A₁}/‖a‖_{A₀}))``."""
    r = []
    for a in vectors:
        if _is_zero(couple, a):
            continue
        n0, n1 = couple.norm0(a), couple.norm1(a)
        r.append(phi_norm_integral(couple, phi, p, a) / (n0 * float(phi(n1 / n0))))
    return EquivalenceReport.from_ratios(r, 0.0, details={"C_fit": float(np.max(r))})


def stability_check(phi, theta0, theta1, q, sigma0, sigma1, vectors, J):
    """Reiteration on sequence couples.

    ``(ℓ_∞^{σ'}, ℓ_∞^{σ''})`` with ``σ' = (1−θ₀)σ₀ + θ₀σ₁`` and
    ``σ'' = (1−θ₁)σ₀ + θ₁σ₁`` is interpolated with φ and compared with
    ``(ℓ_∞^{σ₀}, ℓ_∞^{σ₁})`` interpolated with ``ψ(s) = s^{θ₀} φ(s^{θ₁−θ₀})``.
    """
    sp = (1 - theta0) * sigma0 + theta0 * sigma1
    spp = (1 - theta1) * sigma0 + theta1 * sigma1
    psi = ScalingFunction(lambda s: np.power(s, theta0) * phi(np.power(s, theta1 - theta0)),
                          (0.0, 1.0), phi.grid)
    cA = SequenceCouple(math.inf, sp, math.inf, spp, J)
    cB = SequenceCouple(math.inf, sigma0, math.inf, sigma1, J)
    r = [phi_norm_integral(cA, phi, q, a) / phi_norm_integral(cB, psi, q, a)
         for a in vectors if np.any(a != 0)]
    exact = [sequence_space_norm(phi, q, sp, spp, a) / sequence_space_norm(psi, q, sigma0,
                                                                            sigma1, a)
             for a in vectors if np.any(a != 0)]
    return EquivalenceReport.from_ratios(
        r, 0.0, details={"closed_form_ratio_max_dev": float(np.max(np.abs(np.array(exact) - 1)))})
