"""Deterministic chunked work distribution.

Work is always split into the same fixed-size chunks whatever the thread
count, and each chunk is processed serially (so warm starts inside a chunk
see the same history).  Results therefore do not depend on scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

ENV_THREADS = "STRATA_BOUNDS_THREADS"
CHUNK = 32


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(ENV_THREADS)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ValueError(f"{ENV_THREADS} must be an integer, got {env!r}") from None
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ValueError(f"thread count must be positive, got {threads}")
    return threads


def chunks(n: int, size: int = CHUNK) -> list[range]:
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def chunked_map(fn: Callable[[range], list], n: int, threads: int | None = None,
                size: int = CHUNK) -> list:
    """Apply ``fn`` to each index chunk of ``range(n)`` and concatenate in order."""
    parts = chunks(n, size)
    t = min(resolve_threads(threads), max(len(parts), 1))
    if t == 1:
        out = [fn(c) for c in parts]
    else:
        with ThreadPoolExecutor(max_workers=t) as pool:
            out = list(pool.map(fn, parts))
    return [x for part in out for x in part]
