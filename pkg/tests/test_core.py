import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from interptrace import _pycore, core

_core = pytest.importorskip("interptrace._core")


def test_compiled_backend_selected():
    assert core.BACKEND == "cython"


def test_pure_python_switch():
    code = "import interptrace.core as c; print(c.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"INTERPTRACE_PURE_PYTHON": "1", "PATH": ""})
    assert out.stdout.strip() == "python"


@given(st.integers(0, 10_000), st.integers(2, 200))
def test_toeplitz_backends_agree(seed, n):
    rng = np.random.default_rng(seed)
    w, g = rng.normal(size=n), rng.normal(size=n)
    a = _pycore.toeplitz_lower(w, g)
    b = _core.toeplitz_lower(w, g)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(a).max())


def test_toeplitz_against_direct_sum():
    rng = np.random.default_rng(1)
    w, g = rng.normal(size=30), rng.normal(size=30)
    direct = np.array([sum(w[i - j] * g[j] for j in range(i + 1)) for i in range(30)])
    assert np.allclose(_pycore.toeplitz_lower(w, g), direct, rtol=1e-12)


@given(st.integers(0, 10_000), st.integers(2, 80))
def test_maximal_backends_agree(seed, n):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(-5, 5, n))
    x = np.unique(x)
    P = np.concatenate([[0.0], np.cumsum(rng.uniform(0, 1, x.size - 1) * np.diff(x))])
    assert np.allclose(_pycore.maximal_all(x, P), _core.maximal_all(x, P), rtol=1e-12)


def test_maximal_against_brute_force():
    rng = np.random.default_rng(2)
    x = np.sort(rng.uniform(0, 1, 25))
    P = np.concatenate([[0.0], np.cumsum(rng.uniform(0, 1, 24) * np.diff(x))])
    brute = np.array([max((P[b] - P[a]) / (x[b] - x[a])
                          for a in range(i + 1) for b in range(i, 25) if b > a)
                      for i in range(25)])
    assert np.allclose(_core.maximal_all(x, P), brute, rtol=1e-12)


@given(st.integers(0, 10_000), st.integers(1, 12))
def test_kfunc_backends_agree(seed, n):
    rng = np.random.default_rng(seed)
    absa = rng.uniform(0.1, 2.0, n)
    j = rng.choice(np.arange(-8, 9), n, replace=False)
    c, d = 2.0 ** (-j * 0.0), 2.0 ** (j * 1.0)
    t = np.geomspace(1e-3, 1e3, 13)
    assert np.allclose(_pycore.kfunc_linf(absa, c, d, t), _core.kfunc_linf(absa, c, d, t),
                       rtol=1e-10)


def test_kfunc_single_coordinate():
    t = np.geomspace(1e-3, 1e3, 9)
    got = _core.kfunc_linf(np.array([1.0]), np.array([1.0]), np.array([1.0]), t)
    assert np.allclose(got, np.minimum(1.0, t), rtol=1e-12)
