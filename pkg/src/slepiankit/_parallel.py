from __future__ import annotations

import os
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from slepiankit.exceptions import InvalidInputError
from slepiankit.utils.log import logger

#: Default number of worker threads, falls back to the CPU count
WORKERS_ENV = "SLEPIANKIT_WORKERS"

_T = TypeVar("_T")
_R = TypeVar("_R")


def default_workers() -> int:
    """Number of worker threads used when the caller does not say."""
    value = os.environ.get(WORKERS_ENV, "")
    if value:
        try:
            workers = int(value)
        except ValueError:
            msg = f"{WORKERS_ENV} must be an integer, got {value!r}"
            raise InvalidInputError(msg) from None
        if workers < 1:
            msg = f"{WORKERS_ENV} must be at least 1, got {workers}"
            raise InvalidInputError(msg)
        return workers
    return os.cpu_count() or 1


def ordered_map(
    func: Callable[[_T], _R],
    items: Iterable[_T],
    *,
    workers: int | None = None,
) -> list[_R]:
    """Apply ``func`` to every item, possibly on a thread pool.

    Results come back in input order whatever the schedule, so any reduction
    over them is independent of the worker count.

    Args:
        func: Function of one item. Must not mutate shared state.
        items: Work items.
        workers: Number of threads. ``None`` uses `default_workers`.

    Returns:
        List of results, one per item, in input order.
    """
    work: Sequence[_T] = list(items)
    if workers is None:
        workers = default_workers()
    if workers < 1:
        msg = f"Need at least one worker, got {workers}"
        raise InvalidInputError(msg)
    logger.debug("Mapping %d work items over %d worker(s)", len(work), workers)
    if workers == 1 or len(work) <= 1:
        return [func(item) for item in work]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, work))
