"""Shared worker-pool helper.

The environment variable CKEQUIV_WORKERS fixes the thread count; unset
it to get a small default.  Threads suffice because the heavy work
(BLAS/LAPACK calls) releases the GIL.
"""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "CKEQUIV_WORKERS"


def worker_count() -> int:
    raw = os.environ.get(ENV_VAR)
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        count = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be an integer, got {raw!r}") from None
    if count < 1:
        raise ValueError(f"{ENV_VAR} must be >= 1, got {count}")
    return count


def pmap(fn, items):
    """map() preserving input order, threaded when it pays off."""
    items = list(items)
    count = worker_count()
    if count == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(count, len(items))) as pool:
        return list(pool.map(fn, items))
