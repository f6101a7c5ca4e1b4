"""Process pool for embarrassingly parallel jobs (scenario runs, seeds).

Results always come back in input order, so output never depends on
scheduling.
"""

from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from typing import TYPE_CHECKING, TypeVar

from .logging_config import configure_logging, get_logger

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def default_worker_count() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _init_worker(log_level: str) -> None:
    import torch

    configure_logging(log_level)
    # one intra-op thread per process; the pool is the parallelism
    torch.set_num_threads(1)


def run_jobs(
    fn: Callable[[T], R],
    items: Sequence[T],
    *,
    workers: int,
    log_level: str = "WARNING",
) -> list[R]:
    """Apply ``fn`` to every item, in a spawn-based pool when workers > 1.

    ``fn`` must be a module-level function so it can be pickled.
    """
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")

    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]

    pool_size = min(workers, len(items))
    logger.info("Starting worker pool", workers=pool_size, jobs=len(items))
    try:
        with ProcessPoolExecutor(
            max_workers=pool_size,
            mp_context=multiprocessing.get_context("spawn"),
            initializer=_init_worker,
            initargs=(log_level,),
        ) as pool:
            results = list(pool.map(fn, items))
    except Exception as e:
        logger.error("Worker pool failed", error=f"{type(e).__name__}: {e}", exc_info=True)
        raise
    logger.info("Worker pool finished", jobs=len(results))
    return results
