"""Work caps and the deterministic replication-chunk executor."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from .errors import BudgetExceeded, ConfigError

DEFAULT_WORK_CAP = 20_000_000_000
WORK_CAP_ENV = "GAUSSMAX_WORK_CAP"
# replications per work unit; fixed so results never depend on the worker count
CHUNK_REPS = 256


def resolve_work_cap(cap: int | None = None) -> int:
    if cap is not None:
        return int(cap)
    env = os.environ.get(WORK_CAP_ENV)
    if env:
        try:
            return int(float(env))
        except ValueError:
            raise ConfigError(f"{WORK_CAP_ENV} must be a number, got {env!r}") from None
    return DEFAULT_WORK_CAP


def check_work(work: float, cap: int | None, what: str) -> None:
    cap = resolve_work_cap(cap)
    if work > cap:
        raise BudgetExceeded(f"{what} needs {work:.3g} lattice-point replications, cap is {cap:.3g}")


def check_reps(reps) -> int:
    if int(reps) != reps or reps < 1:
        raise ConfigError(f"reps must be a positive integer, got {reps}")
    return int(reps)


def run_chunks(fn: Callable[[int, int], object], reps: int, threads: int = 1,
               chunk: int = CHUNK_REPS) -> list:
    """Evaluate ``fn(start, stop)`` over fixed rep chunks, returning results in order."""
    if int(threads) != threads or threads < 1:
        raise ConfigError(f"threads must be a positive integer, got {threads}")
    bounds = [(s, min(s + chunk, reps)) for s in range(0, reps, chunk)]
    if threads == 1 or len(bounds) == 1:
        return [fn(s, e) for s, e in bounds]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def concat_chunks(parts: list) -> np.ndarray | tuple:
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(col) for col in zip(*parts))
    return np.concatenate(parts)
