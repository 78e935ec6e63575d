"""Order-preserving parallel map over a process pool.

Work items must carry their own derived seeds (see ``rng``), which makes
the result a pure function of the item; the pool only changes wall time,
never output.  Results come back in submission order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable


def parallel_map(fn: Callable, items: Iterable, workers: int = 1,
                 progress: Callable[[int, int], None] | None = None) -> list:
    """Map ``fn`` over ``items``, optionally across ``workers`` processes.

    ``fn`` must be picklable (a module-level function or a
    ``functools.partial`` of one) when ``workers > 1``.  ``progress``,
    if given, is called as ``progress(done, total)`` after each item
    completes, in submission order.
    """
    items = list(items)
    total = len(items)
    if workers is None:
        workers = 1
    if workers <= 1 or total <= 1:
        out = []
        for i, it in enumerate(items):
            out.append(fn(it))
            if progress is not None:
                progress(i + 1, total)
        return out
    chunk = max(1, total // (workers * 4))
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for i, res in enumerate(pool.map(fn, items, chunksize=chunk)):
            out.append(res)
            if progress is not None:
                progress(i + 1, total)
    return out
