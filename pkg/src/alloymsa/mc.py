"""Seeded, reproducible Monte-Carlo trial runner.

Per-trial seeds are derived from the master seed with a splitmix64 step,
so trial i always sees the same random stream no matter how many worker
threads execute it, and results are accumulated in trial order.  That
makes every experiment byte-identical across reruns and thread counts.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

_MASK = (1 << 64) - 1


def splitmix64(master_seed: int, index: int) -> int:
    """Deterministic per-trial seed: one splitmix64 output for stream `index`."""
    z = (master_seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(splitmix64(master_seed, index))


def resolve_threads(threads: int | None) -> int:
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return threads


def run_trials(
    n_trials: int,
    worker: Callable[[int, np.random.Generator], T],
    master_seed: int,
    threads: int | None = 1,
) -> list[T]:
    """Run `worker(i, rng_i)` for i = 0..n_trials-1, results in trial order."""
    threads = resolve_threads(threads)

    def call(i: int) -> T:
        return worker(i, trial_rng(master_seed, i))

    if threads == 1 or n_trials <= 1:
        return [call(i) for i in range(n_trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(call, range(n_trials)))


def mean_and_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and standard error (sample sigma / sqrt(n))."""
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n == 0:
        return 0.0, 0.0
    mean = float(arr.mean())
    if n == 1:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / np.sqrt(n))
