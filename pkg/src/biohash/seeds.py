"""Named random substreams derived from one master seed.

A single user-facing seed is fanned out to independent streams, one per
purpose ("init", "shuffle", "projection", "split", ...). Each stream is a
function of (seed, name) only, so components stay individually
reproducible no matter which other components run or in what order.
"""

import zlib

import numpy as np


def _entropy(seed: int, name: str):
    # crc32 keeps the name's contribution inside u32 range for SeedSequence
    return [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode("utf-8"))]


def substream(seed: int, name: str) -> np.random.Generator:
    """Generator for the given purpose, independent across names."""
    return np.random.default_rng(np.random.SeedSequence(_entropy(seed, name)))


def subseed(seed: int, name: str) -> int:
    """A derived integer seed, for APIs that take a seed rather than a rng."""
    ss = np.random.SeedSequence(_entropy(seed, name))
    return int(ss.generate_state(1, np.uint64)[0])
