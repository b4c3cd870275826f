"""Deterministic sharded execution for Monte Carlo estimators.

Estimators split work into a fixed number of shards with independent,
seed-derived RNG streams and merge per-shard moments in shard order, so the
result is identical whatever WHITTAKER_LAB_THREADS says -- threads change
wall time only.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["thread_count", "shard_map"]


def thread_count():
    """Worker threads from WHITTAKER_LAB_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("WHITTAKER_LAB_THREADS", "1")))
    except ValueError:
        return 1


def shard_map(fn, n_shards, threads=None):
    """[fn(0), ..., fn(n_shards-1)], possibly computed on a thread pool.

    Shard order of the result list is fixed; fn must not share mutable
    state between shards.
    """
    if threads is None:
        threads = thread_count()
    if threads <= 1 or n_shards <= 1:
        return [fn(i) for i in range(n_shards)]
    with ThreadPoolExecutor(max_workers=min(threads, n_shards)) as pool:
        return list(pool.map(fn, range(n_shards)))
