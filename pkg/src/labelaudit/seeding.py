"""Deterministic seed derivation for every stochastic component."""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(seed: int, stream: int) -> int:
    """SplitMix64 finalizer applied to ``seed`` advanced by ``stream + 1`` golden-ratio steps.

    Gives independent, reproducible 64-bit sub-seeds from one root seed, so
    per-pass dropout masks, per-fold trainings, and pipeline stages can each be
    recomputed in isolation without sharing generator state.
    """
    x = (seed + (stream + 1) * _GOLDEN) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def generator(seed: int, stream: int) -> np.random.Generator:
    """A numpy Generator seeded from ``mix64(seed, stream)``."""
    return np.random.default_rng(mix64(seed, stream))
