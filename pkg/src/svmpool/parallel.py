"""Order-preserving fan-out over threads (the numba kernels release the GIL)."""

from concurrent.futures import ThreadPoolExecutor


def map_ordered(fn, items, jobs=1):
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
        return list(pool.map(fn, items))
