"""Keyed random streams and deterministic replica ensembles."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

# stream identifiers
STREAM_WALK = 0
STREAM_LERW = 1
STREAM_UST = 2
STREAM_SLE = 3
STREAM_DOMAIN = 4
STREAM_MIRROR = 5


def make_rng(seed: int, replica: int = 0, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, replica, stream)``."""
    ss = np.random.SeedSequence([int(seed), int(replica), int(stream)])
    return np.random.Generator(np.random.Philox(ss))


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)


def run_replicas(fn, seed: int, n: int, stream: int = 0, threads: int | None = None,
                 offset: int = 0) -> list:
    """Evaluate ``fn(rng, replica)`` for ``n`` replicas.

    Every replica gets its own keyed generator, so the output list (ordered by
    replica index) does not depend on the number of threads.
    """
    threads = threads or 1
    jobs = [(make_rng(seed, offset + k, stream), offset + k) for k in range(n)]
    if threads <= 1 or n <= 1:
        return [fn(r, k) for r, k in jobs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda job: fn(*job), jobs))
