"""Seeded, block-partitioned Monte Carlo streams.

Samples are cut into fixed blocks of ``BLOCK_SIZE``; block ``b`` owns the
substream ``SeedSequence(seed, spawn_key=(b,))``.  Workers may evaluate blocks
in any order, but results are always gathered in block order, so the worker
count never changes a number.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .inputs import draw

BLOCK_SIZE = 4096

# complex entries held by one (rows, support, n_r) temporary
_CHUNK_ELEMENTS = 1 << 20


@dataclass(frozen=True, eq=False)
class Block:
    index: int
    idx: np.ndarray | None  # (B, K) support indices, None with Gaussian users
    symbols: tuple  # per-user (B, n_t) inputs
    noise: np.ndarray  # (B, n_r), CN(0, I)

    @property
    def size(self):
        return self.noise.shape[0]


def block_rng(seed, block):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(block),))))


def block_count(samples):
    return math.ceil(int(samples) / BLOCK_SIZE)


def draw_block(system, samples, seed, b):
    size = min(BLOCK_SIZE, int(samples) - b * BLOCK_SIZE)
    rng = block_rng(seed, b)
    idx, symbols = [], []
    for user in system.users:
        i, x = draw(user.input_law, rng, size)
        idx.append(i)
        symbols.append(x)
    re = rng.standard_normal((size, system.n_r))
    im = rng.standard_normal((size, system.n_r))
    noise = (re + 1j * im) * math.sqrt(0.5)
    stacked = None if any(i is None for i in idx) else np.stack(idx, axis=1)
    return Block(b, stacked, tuple(symbols), noise)


def map_blocks(fn, system, samples, seed, threads=1):
    """``[fn(block) for block in stream]`` evaluated on ``threads`` workers."""
    n = block_count(samples)

    def run(b):
        return fn(draw_block(system, samples, seed, b))

    if threads is None or threads <= 1 or n <= 1:
        return [run(b) for b in range(n)]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(run, range(n)))


def gather(results, key, axis=0):
    """Concatenate per-block arrays stored under ``key`` in block order."""
    return np.concatenate([r[key] for r in results], axis=axis)


def chunk_rows(rows, support, n_r):
    """Row slices that keep ``rows x support x n_r`` temporaries bounded."""
    step = max(1, _CHUNK_ELEMENTS // max(1, support * n_r))
    return [slice(i, min(i + step, rows)) for i in range(0, rows, step)]


def std_error(values, axis=0):
    values = np.asarray(values)
    n = values.shape[axis]
    if n < 2:
        return np.full(np.delete(values.shape, axis), np.inf) if values.ndim > 1 else math.inf
    return np.std(values, axis=axis, ddof=1) / math.sqrt(n)
