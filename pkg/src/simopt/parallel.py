"""Deterministic worker pool for embarrassingly parallel rollout work.

Tasks are pure functions of their arguments (each carries its own derived
seed), results are reduced in task-index order, and the pool uses forked
processes, so output is bit-identical for any worker count, including 1
(which short-circuits to a plain map in-process). The default pool size
comes from the SIMOPT_WORKERS environment variable, falling back to the
number of logical cores.
"""

from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

__all__ = ["resolve_workers", "parallel_map"]


def resolve_workers(explicit: int | None = None) -> int:
    """Worker count: explicit argument, else SIMOPT_WORKERS, else cores."""
    if explicit is not None:
        if explicit < 1:
            raise ValueError("worker count must be >= 1")
        return explicit
    env = os.environ.get("SIMOPT_WORKERS")
    if env is not None:
        n = int(env)
        if n < 1:
            raise ValueError(f"SIMOPT_WORKERS must be >= 1, got {env}")
        return n
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int | None = None) -> list[R]:
    """Map a pure function over items, preserving item order in the result."""
    items = list(items)
    n_workers = resolve_workers(workers)
    if n_workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, len(items) // (4 * n_workers))
    with ProcessPoolExecutor(max_workers=n_workers, mp_context=ctx) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
