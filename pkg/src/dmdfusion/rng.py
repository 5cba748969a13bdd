"""Seeded child streams: one master seed, independent generators per purpose."""

from __future__ import annotations

import zlib

import numpy as np


def child_rng(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Generator keyed by (seed, tag, index); stable across processes and runs."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(tag.encode()), int(index)]
    return np.random.default_rng(np.random.SeedSequence(entropy))
