"""Small shared helpers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def resolve_threads(threads: int) -> int:
    """0 means all cores."""
    if threads == 0:
        return os.cpu_count() or 1
    return max(1, threads)


def parallel_map(fn, items, threads: int) -> list:
    """Ordered map; falls back to a plain loop for a single worker.

    Results are combined in item order, so output does not depend on
    scheduling. numpy kernels release the GIL, which is where the speedup
    comes from.
    """
    items = list(items)
    workers = resolve_threads(threads)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
