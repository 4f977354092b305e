"""Worker-count control. Every parallel path in the package is written so its
result does not depend on how many workers run it."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_VAR = "TERRASCOPE_THREADS"


def worker_count() -> int:
    """CPU count, capped by $TERRASCOPE_THREADS when that holds an integer."""
    cpus = os.cpu_count() or 1
    raw = os.environ.get(ENV_VAR)
    if raw:
        try:
            return max(1, min(int(raw), cpus))
        except ValueError:
            pass
    return cpus


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """``list(map(fn, items))`` spread over the worker pool, results in input order."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
