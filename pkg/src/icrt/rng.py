"""Deterministic random-stream management.

All randomness in the package flows from a single root seed.  Independent
named sub-streams are derived with ``substream(seed, *path)``: the path
elements (ints or short strings) are folded into a ``SeedSequence`` spawn
key, so replications are order-independent and reproducible regardless of
scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream"]


def _as_key(part) -> int:
    """Map a path element to a uint32 spawn-key entry."""
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream path ints must be >= 0, got {part}")
        return int(part)
    if isinstance(part, str):
        digest = hashlib.blake2s(part.encode("utf-8"), digest_size=4).digest()
        return int.from_bytes(digest, "big")
    raise TypeError(f"stream path elements must be int or str, got {type(part)!r}")


def substream(seed: int, *path) -> np.random.Generator:
    """Return a generator for the sub-stream identified by ``path``.

    Identical (seed, path) pairs yield identical streams; distinct paths
    yield statistically independent streams.
    """
    key = tuple(_as_key(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))
