"""Deterministic, splittable random streams.

One integer seed fans out into independent named streams (init, dropout,
sampler, ...) so that consuming randomness in one part of the pipeline never
shifts the draws seen by another. ``stream(name)`` always returns a fresh
generator positioned at the start of that stream; callers hold onto it and
consume it sequentially.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _stream_key(name: str) -> int:
    # Stable across processes (unlike hash()), 64-bit is plenty.
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "big")


class SeedStreams:
    """Named independent RNG streams derived from a single seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def stream(self, name: str) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(_stream_key(name),))
        return np.random.default_rng(seq)

    def __repr__(self) -> str:
        return f"SeedStreams(seed={self.seed})"
