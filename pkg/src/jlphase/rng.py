"""Seeding contract and chunked parallel execution.

Every random quantity in the package is drawn from a *substream*: a
``numpy.random.Generator`` backed by PCG64 whose state is derived from a
single 64-bit master seed and an integer key by numpy's ``SeedSequence``
hashing (``SeedSequence(entropy=seed, spawn_key=key)``).  The mixing is a
fixed, documented function of ``(seed, key)``, so draws are reproducible
bit-for-bit on any platform running the same numpy major version.

Monte Carlo loops split their trials into chunks of ``CHUNK_SIZE`` and chunk
``j`` consumes substream ``(*key, j)``.  The chunk layout therefore depends
only on ``n``, never on the thread count, and all reductions are done on
integer counts or with ``math.fsum`` so the result is independent of the
order in which chunks finish.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .errors import DomainError

T = TypeVar("T")

SEED_MASK = (1 << 64) - 1
CHUNK_SIZE = 2048
DEFAULT_SEED = 20240613

# Key prefixes, so that independent consumers sharing a master seed never
# collide on a substream.
KEY_SPHERE = 1
KEY_MATRIX = 2
KEY_DISTORTION = 3
KEY_FAILURE = 4
KEY_TAIL_MC = 5
KEY_SWEEP = 6
KEY_EXPERIMENT = 7


def check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or seed < 0 or seed > SEED_MASK:
        raise DomainError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for substream ``key`` of master ``seed``."""
    seed = check_seed(seed)
    if any(int(k) < 0 for k in key):
        raise DomainError(f"substream key entries must be non-negative, got {key!r}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def thread_count() -> int:
    """Worker threads allowed by ``JL_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("JL_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"JL_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise DomainError(f"JL_THREADS must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def parallel_map(fn: Callable[[T], object], items: Iterable[T]) -> list:
    """``list(map(fn, items))`` on up to ``thread_count()`` threads, results in input order."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def chunk_sizes(n: int, chunk: int = CHUNK_SIZE) -> list[int]:
    if n < 1:
        raise DomainError(f"number of samples must be >= 1, got {n}")
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])


def chunked(
    n: int,
    seed: int,
    key: Sequence[int],
    fn: Callable[[np.random.Generator, int], T],
    chunk: int = CHUNK_SIZE,
) -> list[T]:
    """Run ``fn(rng, m)`` for each chunk of an ``n``-trial loop, in chunk order."""
    sizes = chunk_sizes(n, chunk)
    jobs = [(j, m) for j, m in enumerate(sizes)]
    return parallel_map(lambda job: fn(substream(seed, *key, job[0]), job[1]), jobs)


def fsum_mean(parts: Iterable[tuple[float, int]]) -> float:
    """Mean from (partial sum, count) pairs with exactly rounded summation."""
    parts = list(parts)
    total = math.fsum(p for p, _ in parts)
    count = sum(c for _, c in parts)
    return total / count
