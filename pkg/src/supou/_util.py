"""Shared plumbing: error types, seeded stream derivation, chunked map-reduce."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration (CLI exit code 2)."""


class DataError(ValueError):
    """Invalid or unusable input data (CLI exit code 3)."""


class EstimationError(RuntimeError):
    """Estimation pipeline failed to produce a usable result (CLI exit code 4)."""


class NumericsError(RuntimeError):
    """A numerical routine produced results outside its guaranteed bounds."""


def stream_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator derived from (seed, stream-id...).

    Streams with distinct ids are statistically independent; the mapping is
    deterministic, so any (seed, stream) pair always yields the same draws.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(stream)))


def chunk_sizes(total: int, chunk: int) -> list[int]:
    """Split `total` work items into fixed-size chunks (last one ragged)."""
    if total <= 0:
        return []
    n_full, rem = divmod(total, chunk)
    return [chunk] * n_full + ([rem] if rem else [])


def map_chunks(fn, sizes: list[int], workers: int = 1) -> list:
    """Run fn(chunk_index, chunk_size) for every chunk, in chunk order.

    The chunk decomposition is independent of `workers`, and results are
    reduced in chunk order, so outputs are identical for any worker count;
    workers only bound how many chunks are in flight at once.
    """
    if workers <= 1 or len(sizes) <= 1:
        return [fn(i, m) for i, m in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, i, m) for i, m in enumerate(sizes)]
        return [f.result() for f in futures]
