"""Order-independent execution of independent tasks."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence

__all__ = ["WORKERS_ENV", "default_workers", "run_parallel"]

WORKERS_ENV = "RYDMIS_WORKERS"

Task = tuple[Callable[..., Any], tuple]


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _call(task: Task):
    fn, args = task
    try:
        return True, fn(*args)
    except Exception as exc:  # noqa: BLE001 - failures become rows
        return False, f"{type(exc).__name__}: {exc}"


def _default_key(rec):
    return (rec.n, rec.rho, rec.seed)


def run_parallel(
    tasks: Sequence[Task],
    workers: int = 1,
    key: Callable[[Any], Any] = _default_key,
    on_error: Callable[[tuple, str], Any] | None = None,
) -> list:
    """Run ``fn(*args)`` for every task and return the results sorted by ``key``.

    A task that raises is turned into a row by ``on_error(args, message)``;
    without ``on_error`` the first failure is re-raised as ``RuntimeError``.
    The output does not depend on ``workers``.
    """
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_call, tasks, chunksize=1))
    else:
        outcomes = [_call(t) for t in tasks]
    rows = []
    for task, (ok, val) in zip(tasks, outcomes):
        if ok:
            rows.append(val)
        elif on_error is not None:
            rows.append(on_error(task[1], val))
        else:
            raise RuntimeError(val)
    return sorted(rows, key=key)
