"""Order-preserving thread pool for nogil numerical jobs."""

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "MFDR_THREADS"


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return 1


def parallel_map(fn, items, threads=None):
    """``[fn(x) for x in items]``, possibly on a thread pool; result order is input order."""
    items = list(items)
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
