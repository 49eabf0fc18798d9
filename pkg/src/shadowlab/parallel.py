"""Deterministic parallel map for the Monte-Carlo loops."""

import multiprocessing


def parallel_map(fn, items, workers=1):
    """Order-preserving map over items; forks a worker pool when workers > 1.

    Tasks must draw randomness only from substreams pre-assigned by task
    index, so the returned list is identical for every worker count.
    """
    items = list(items)
    if workers is None:
        workers = 1
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    try:
        ctx = multiprocessing.get_context("fork")
    except ValueError:
        ctx = multiprocessing.get_context()
    with ctx.Pool(processes=min(workers, len(items))) as pool:
        chunk = max(1, len(items) // (workers * 4))
        return pool.map(fn, items, chunksize=chunk)
