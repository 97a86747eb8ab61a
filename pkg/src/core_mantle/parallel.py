"""Seed splitting and an order-preserving thread map.

Every random stream is derived from a master seed and a stream index, so
results do not depend on how work is scheduled. ``CORE_MANTLE_THREADS``
caps the number of worker threads (default: 1).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "CORE_MANTLE_THREADS"


def substream(seed: int, stream: int) -> np.random.Generator:
    """Generator for stream ``stream`` of master seed ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream)]))


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def ordered_map(fn, items) -> list:
    """``[fn(x) for x in items]``, possibly on several threads."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
