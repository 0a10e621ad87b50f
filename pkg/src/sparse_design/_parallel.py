"""Worker-count resolution and a deterministic chunked map.

Chunks are always formed the same way regardless of the worker count, and
results are reduced in chunk order, so outputs are identical for any number
of threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

ENV_THREADS = "SPARSE_DESIGN_THREADS"

_T = TypeVar("_T")
_R = TypeVar("_R")


def resolve_threads(requested: int | None = None) -> int:
    """Return the effective worker count (0 or None means auto)."""
    if requested is None:
        env = os.environ.get(ENV_THREADS)
        if env is not None:
            try:
                requested = int(env)
            except ValueError as exc:
                raise ValueError(f"{ENV_THREADS} must be an integer, got {env!r}") from exc
    if requested is None or requested == 0:
        return os.cpu_count() or 1
    if requested < 0:
        raise ValueError(f"thread count must be >= 0, got {requested}")
    return requested


def chunked_map(fn: Callable[[_T], _R], chunks: Iterable[_T], threads: int | None = None) -> list[_R]:
    """Apply ``fn`` to each chunk, preserving chunk order in the result."""
    items: Sequence[_T] = list(chunks)
    n_workers = resolve_threads(threads)
    if n_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, items))
