"""Ordered parallel map shared by quadrature, grid checks and sweeps."""

from collections.abc import Callable, Iterable
from typing import TypeVar

from joblib import Parallel, delayed

from desitter_kg.src.settings import settings

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    """Number of workers allowed by DSKG_THREADS."""
    return max(1, int(settings.DSKG_THREADS))


def parallel_map(func: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Apply ``func`` to every item, preserving input order.

    Threads are used so numpy kernels release the GIL; results come back in
    input order, so any reduction over them has a fixed summation order.

    Args:
        func: Pure function of one item.
        items: Work items.

    Returns:
        List of results in the order of ``items``.
    """
    work = list(items)
    n_jobs = thread_count()
    if n_jobs == 1 or len(work) < 2:
        return [func(item) for item in work]
    return Parallel(n_jobs=n_jobs, prefer="threads")(delayed(func)(item) for item in work)
