from __future__ import annotations

from typing import Callable, Iterable, TypeVar

from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

T = TypeVar("T")
R = TypeVar("R")


def _single_threaded(fn, arg):
    # pin BLAS to one thread so results do not depend on the worker layout
    with threadpool_limits(limits=1):
        return fn(arg)


def pmap(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """Order-preserving map; ``workers > 1`` fans out to worker processes."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [_single_threaded(fn, x) for x in items]
    return Parallel(n_jobs=workers)(delayed(_single_threaded)(fn, x) for x in items)


def chunks(n: int, k: int) -> list[range]:
    """Split ``range(n)`` into ``k`` contiguous pieces (some may be empty)."""
    k = max(1, k)
    edges = [round(i * n / k) for i in range(k + 1)]
    return [range(edges[i], edges[i + 1]) for i in range(k) if edges[i + 1] > edges[i]]
