"""
Instance-level worker pool.

Jobs are processed by a process pool (or inline for one worker); every
result is handed to a single callback in the parent process, in job order,
so that only one writer ever touches the result files.
"""
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional
import logging

import env

logger = logging.getLogger(__name__)


def run_jobs(func: Callable, jobs: Iterable, on_result: Optional[Callable] = None,
             workers: Optional[int] = None) -> List:
    """
    Apply func to every job and pass each result to on_result.

    func must be a picklable module-level function when workers > 1.
    Returns the list of results in job order.
    """
    jobs = list(jobs)
    workers = env.WORKERS if workers is None else workers
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")
    if not jobs:
        logger.info("No jobs to run")
        return []

    results = []
    if workers == 1 or len(jobs) == 1:
        logger.info(f"Running {len(jobs)} jobs inline")
        outputs = map(func, jobs)
        pool = None
    else:
        logger.info(f"Running {len(jobs)} jobs on {workers} worker processes")
        pool = ProcessPoolExecutor(max_workers=workers)
        outputs = pool.map(func, jobs)
    try:
        for done, result in enumerate(outputs, start=1):
            if on_result is not None:
                on_result(result)
            results.append(result)
            if done % 10 == 0 or done == len(jobs):
                logger.info(f"Completed {done}/{len(jobs)} jobs")
    finally:
        if pool is not None:
            pool.shutdown(wait=True, cancel_futures=True)
    return results
