"""Seeding and trial scheduling.

Every Monte Carlo trial draws from its own generator keyed by
``(stream, master_seed, trial)``, so results never depend on how trials are
spread over threads.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "DIVSANDPILE_THREADS"


def stream_id(name: str) -> int:
    """Stable integer tag for a named random stream."""
    return zlib.crc32(name.encode())


def trial_rng(seed: int, trial: int, stream: str = "default") -> np.random.Generator:
    seq = np.random.SeedSequence([stream_id(stream), int(seed) & (2**64 - 1), int(trial)])
    return np.random.Generator(np.random.PCG64(seq))


def thread_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def map_trials(fn, trials, threads: int | None = None) -> list:
    """``[fn(t) for t in trials]``, possibly on a thread pool; order is preserved."""
    trials = list(trials)
    workers = min(thread_count(threads), max(1, len(trials)))
    if workers == 1:
        return [fn(t) for t in trials]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, trials))
