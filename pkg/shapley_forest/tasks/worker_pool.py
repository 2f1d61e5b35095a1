import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable, List, Optional, Sequence

logger = logging.getLogger(__name__)


def resolve_jobs(n_jobs: int) -> int:
    """Non-positive values mean "all cores but |n_jobs| - 1", joblib style"""
    if n_jobs >= 1:
        return n_jobs
    return max(1, (os.cpu_count() or 1) + 1 + n_jobs)


def run_tasks(
    fn: Callable[[Any], Any],
    payloads: Sequence[Any],
    n_jobs: int = 1,
    initializer: Optional[Callable[..., None]] = None,
    initargs: Iterable[Any] = (),
) -> List[Any]:
    """
    Run fn over payloads and return results in payload order.

    With one job everything runs in this process (the initializer too), so
    results never depend on the worker count.
    """
    jobs = min(resolve_jobs(n_jobs), max(1, len(payloads)))
    if jobs == 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(payload) for payload in payloads]

    chunksize = max(1, len(payloads) // (4 * jobs))
    logger.debug(f"Dispatching {len(payloads)} tasks to {jobs} workers (chunksize={chunksize})")
    with ProcessPoolExecutor(max_workers=jobs, initializer=initializer, initargs=tuple(initargs)) as executor:
        return list(executor.map(fn, payloads, chunksize=chunksize))
