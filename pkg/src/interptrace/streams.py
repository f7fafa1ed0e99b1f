"""Reproducible random streams and order-independent aggregation.

Every Monte Carlo task draws from counter-based Philox streams keyed by
``(master seed, task id, block index)``.  Samples are produced in fixed-size
blocks, so the numbers drawn for a block never depend on how blocks are
scheduled across workers.
"""

from concurrent.futures import ThreadPoolExecutor
import math
import zlib

import numpy as np

from .reports import MCEstimate

DEFAULT_BLOCK = 1 << 14


def task_key(task):
    """Map a task identifier (int or str) to a nonnegative integer."""
    if isinstance(task, (int, np.integer)):
        return int(task)
    return zlib.crc32(str(task).encode("utf-8"))


def stream(seed, task=0, block=0):
    """Philox generator for one ``(seed, task, block)`` triple."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(task_key(task), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def blocks(n, block_size=DEFAULT_BLOCK):
    """Sizes of consecutive blocks covering ``n`` samples."""
    n = int(n)
    full, rest = divmod(n, block_size)
    out = [block_size] * full
    if rest:
        out.append(rest)
    return out


def run_blocks(fn, n, seed, task, jobs=1, block_size=DEFAULT_BLOCK):
    """Evaluate ``fn(rng, size, offset)`` on every block and concatenate.

    The output order is the block order regardless of ``jobs``.
    """
    sizes = blocks(n, block_size)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int) if sizes else []
    args = [(stream(seed, task, b), s, int(o)) for b, (s, o) in enumerate(zip(sizes, offsets))]
    if jobs and jobs > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=int(jobs)) as ex:
            parts = list(ex.map(lambda a: fn(*a), args))
    else:
        parts = [fn(*a) for a in args]
    if not parts:
        return np.empty(0)
    return np.concatenate(parts, axis=0)


def mc_estimate(values):
    """Mean with a 95% half width, using exactly rounded summation."""
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    mean = math.fsum(v) / n
    if n > 1:
        var = math.fsum((v - mean) ** 2) / (n - 1)
    else:
        var = 0.0
    return MCEstimate(float(mean), float(1.96 * math.sqrt(var / n)), int(n))
