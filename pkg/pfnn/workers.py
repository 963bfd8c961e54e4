"""Worker-count policy and an order-preserving thread map."""

import concurrent.futures
import os
from typing import Callable, Iterable, Optional, TypeVar

import psutil

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "PFNN_THREADS"


def default_workers() -> int:
    """PFNN_THREADS if set, otherwise the number of physical cores."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}")
        if value < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1, got {value}")
        return value
    return psutil.cpu_count(logical=False) or os.cpu_count() or 1


def resolve_workers(workers: Optional[int]) -> int:
    if workers is None:
        return default_workers()
    if int(workers) < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return int(workers)


def map_ordered(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = 1) -> list[R]:
    """
    fn over items, results in input order.

    Runs inline for a single worker so tracebacks stay readable; otherwise a thread pool
    (numpy and scipy release the GIL inside the heavy kernels).
    """
    items = list(items)
    n = min(resolve_workers(workers), max(len(items), 1))
    if n == 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=n) as executor:
        return list(executor.map(fn, items))
