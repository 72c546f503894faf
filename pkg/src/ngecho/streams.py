"""Seeded random streams and chunked, order-stable parallel evaluation.

Every Monte Carlo loop in the package is split into fixed-size chunks.
Chunk ``i`` always draws from the stream ``SeedSequence(seed, spawn_key=(i,))``
and results are reduced in chunk order, so totals depend only on
``(seed, n_samples, chunk)`` and never on how many workers ran them.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

import numpy as np

T = TypeVar("T")

DEFAULT_CHUNK = 16384
ENV_THREADS = "NGECHO_THREADS"


def worker_count(requested: Optional[int] = None) -> int:
    """Resolve the number of workers, capped by ``NGECHO_THREADS`` if set."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(ENV_THREADS)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, int(n))


def chunk_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Generator for chunk ``index`` of the root ``seed``.

    ``stream`` separates independent uses of the same seed (e.g. bath
    geometry vs trajectories) without changing the chunk layout.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def chunk_sizes(n: int, chunk: int = DEFAULT_CHUNK) -> List[int]:
    if n <= 0:
        return []
    full, rest = divmod(int(n), int(chunk))
    return [chunk] * full + ([rest] if rest else [])


def map_chunks(
    fn: Callable[[np.random.Generator, int, int], T],
    n: int,
    seed: int,
    workers: Optional[int] = None,
    chunk: int = DEFAULT_CHUNK,
    stream: int = 0,
) -> List[T]:
    """Evaluate ``fn(rng, size, index)`` over all chunks; results in chunk order."""
    sizes = chunk_sizes(n, chunk)

    def run(i: int) -> T:
        return fn(chunk_rng(seed, i, stream), sizes[i], i)

    nw = min(worker_count(workers), max(1, len(sizes)))
    if nw == 1:
        return [run(i) for i in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(run, range(len(sizes))))
