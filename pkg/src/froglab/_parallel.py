"""Worker-count policy for embarrassingly parallel loops."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count(requested: int | None = None) -> int:
    """Number of workers; ``FROGLAB_THREADS`` caps it (0 or unset = auto)."""
    auto = os.cpu_count() or 1
    env = os.environ.get("FROGLAB_THREADS", "").strip()
    cap = auto
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"FROGLAB_THREADS must be an integer, got {env!r}") from None
        if value < 0:
            raise ValueError("FROGLAB_THREADS must be nonnegative")
        cap = value or auto
    n = cap if requested is None or requested <= 0 else min(requested, cap)
    return max(1, n)


def parallel_map(fn, items, workers: int | None = None) -> list:
    """``list(map(fn, items))`` on a thread pool; result order is preserved."""
    items = list(items)
    n = min(worker_count(workers), len(items))
    if n <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
