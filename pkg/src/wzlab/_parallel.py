"""Deterministic path-parallel execution.

Experiments split their Monte Carlo paths into fixed chunks (boundaries
depend only on n_paths and chunk size) and reduce worker results in chunk
order, so reports are bit-identical for any worker count.
"""

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor

__all__ = ["parallel_map", "path_chunks", "default_jobs"]


def path_chunks(n_paths, chunk_paths):
    """[(lo, hi), ...] covering range(n_paths) in fixed-size chunks."""
    chunk_paths = max(1, int(chunk_paths))
    return [(lo, min(lo + chunk_paths, n_paths)) for lo in range(0, n_paths, chunk_paths)]


def parallel_map(fn, tasks, n_jobs=1):
    """Map fn over tasks, preserving order; forks workers when n_jobs > 1."""
    tasks = list(tasks)
    if n_jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=min(n_jobs, len(tasks)), mp_context=ctx) as ex:
        return list(ex.map(fn, tasks))


def default_jobs():
    env = os.environ.get("WZ_LAB_THREADS")
    if env:
        return max(1, int(env))
    return 1
