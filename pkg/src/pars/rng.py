"""Labelled random streams derived from a single experiment seed.

Every source of randomness in a run (data generation, noise injection,
batch order, augmentations, complementary-label draws, ...) pulls from its
own named stream so results do not depend on call interleaving or on which
other components run. Streams are stable across processes and platforms.
"""

import zlib

import numpy as np


def stream(seed, *tags):
    """Generator for the stream identified by (seed, tags)."""
    words = [int(seed) & 0xFFFFFFFF]
    for tag in tags:
        words.append(zlib.crc32(str(tag).encode("utf-8")))
    return np.random.default_rng(np.random.SeedSequence(words))
