"""
Per-instance error handling for experiment sweeps.

One failing instance must not abort a sweep: the decorated function's
exception is logged and replaced by a result row with status=failed.
"""
from functools import wraps
from typing import Callable
import logging

logger = logging.getLogger(__name__)


def handle_instance_errors(action: str):
    """
    Decorator for functions taking a job (first positional argument or
    `job=`) that exposes instance_id, method, delta and failed_row().

    Usage:
        @handle_instance_errors("reconstruction")
        def reconstruct_instance(job):
            ...
            return row
    """
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs):
            job = kwargs.get('job', args[0] if args else None)
            label = "unknown"
            if job is not None and hasattr(job, 'instance_id'):
                label = f"instance_id={job.instance_id} method={job.method} delta={job.delta}"
            try:
                return func(*args, **kwargs)
            except (ValueError, RuntimeError) as e:
                logger.error(f"{action.capitalize()} failed for {label}: {e}", exc_info=True)
            except Exception as e:
                logger.error(f"Unexpected error during {action} for {label}: {e}", exc_info=True)
            if job is None or not hasattr(job, 'failed_row'):
                raise RuntimeError(f"{action} failed and no job was given to describe the failure")
            return job.failed_row()

        return wrapper
    return decorator
