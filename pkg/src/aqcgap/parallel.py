"""Process-pool fan-out over independent s values.

Each worker receives the (immutable) system once through the pool
initializer; tasks are module-level functions ``task(system, s, **kw)``.
Results come back in input order, so output never depends on scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

from threadpoolctl import threadpool_limits

from .errors import InputError

ENV_JOBS = "AQCGAP_JOBS"

_SYSTEM = None


def resolve_jobs(jobs: int | None = None) -> int:
    """``jobs`` if given, else ``$AQCGAP_JOBS``, else the usable CPU count."""
    if jobs is None:
        env = os.environ.get(ENV_JOBS)
        if env:
            try:
                jobs = int(env)
            except ValueError as exc:
                raise InputError(f"{ENV_JOBS} must be an integer, got {env!r}") from exc
        else:
            try:
                jobs = len(os.sched_getaffinity(0))
            except AttributeError:
                jobs = os.cpu_count() or 1
    if jobs < 1:
        raise InputError(f"worker count must be >= 1, got {jobs}")
    return jobs


def _init(system) -> None:
    global _SYSTEM
    _SYSTEM = system
    # one BLAS thread per worker keeps runs reproducible and avoids oversubscription
    threadpool_limits(1)


def _run(task, s, kwargs):
    return task(_SYSTEM, s, **kwargs)


def map_over_s(task: Callable, system, s_values: Sequence[float], jobs: int | None = None, **kwargs) -> list:
    s_values = list(s_values)
    jobs = min(resolve_jobs(jobs), max(1, len(s_values)))
    if jobs == 1:
        with threadpool_limits(1):
            return [task(system, s, **kwargs) for s in s_values]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init, initargs=(system,)) as pool:
        futures = [pool.submit(_run, task, s, kwargs) for s in s_values]
        return [f.result() for f in futures]
