from concurrent.futures import ThreadPoolExecutor


def pool_map(fn, items, jobs):
    """``map`` over a thread pool, results in input order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
