"""Ordered fan-out over independent work items, capped by ``CORRSIM_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    raw = os.environ.get("CORRSIM_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def ordered_map(fn, items) -> list:
    """``[fn(x) for x in items]``, possibly threaded; output order follows input order."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def chunk_ranges(total: int, chunk: int) -> list[tuple[int, int]]:
    chunk = max(1, int(chunk))
    return [(start, min(chunk, total - start)) for start in range(0, total, chunk)]
