"""Deterministic fan-out of independent solver tasks."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np


def task_seed(seed: int, *key: int) -> int:
    """A 32-bit seed derived from the run seed and an integer task key."""
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in key)])
    return int(ss.generate_state(1)[0])


def run_tasks(fn, jobs: list, tasks: int = 1) -> list:
    """``[fn(j) for j in jobs]``, optionally across ``tasks`` processes.

    Results come back in job order, so output does not depend on ``tasks``.
    """
    if tasks <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(tasks, len(jobs))) as pool:
        return list(pool.map(fn, jobs))
