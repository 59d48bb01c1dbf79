# Scheduler package: instance-level worker pool
from scheduler.pool import run_jobs

__all__ = ['run_jobs']
