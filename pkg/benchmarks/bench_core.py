"""Timing of the compiled hot loops against their numpy versions.

Run with ``python3 benchmarks/bench_core.py``.  Each routine is timed on
both backends with identical inputs and the largest absolute difference
of the outputs is printed next to the timings.
"""

import argparse
import timeit

import numpy as np

from interptrace import _pycore

try:
    from interptrace import _core
except ImportError:
    _core = None


def cases(rng, size):
    x = np.sort(rng.uniform(0.0, 10.0, size))
    P = np.cumsum(rng.uniform(0.0, 1.0, size))
    w = rng.uniform(0.0, 1.0, 8 * size)
    g = rng.uniform(-1.0, 1.0, 8 * size)
    absa = np.abs(rng.normal(size=40))
    c = np.exp2(-np.arange(40) * 0.0)
    d = np.exp2(np.arange(40) * 1.0 - 20.0)
    t = np.geomspace(1e-6, 1e6, size // 4)
    return {
        "maximal_all": (x, P),
        "toeplitz_lower": (w, g),
        "kfunc_linf": (absa, c, d, t),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'routine':16s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for name, inputs in cases(rng, args.size).items():
        fp = getattr(_pycore, name)
        tp = min(timeit.repeat(lambda: fp(*inputs), number=1, repeat=args.repeat))
        if _core is None:
            print(f"{name:16s} {tp:11.4f} {'n/a':>11s}")
            continue
        fc = getattr(_core, name)
        tc = min(timeit.repeat(lambda: fc(*inputs), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(np.asarray(fp(*inputs)) - np.asarray(fc(*inputs)))))
        print(f"{name:16s} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
