"""Confidence-based sample selection and pseudo-label generation.

A batch is split into an "ambiguous" set (max predicted probability strictly
above the threshold) and a "noisy" set (the rest). The rule is label-free:
it reads only the prediction, never the given label. Pseudo-labels take the
argmax class (lowest index on ties) plus a complementary label drawn
uniformly from the remaining classes.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SelectionSplit:
    ambiguous: np.ndarray  # indices with max confidence > tau
    noisy: np.ndarray  # the complement, in batch order
    max_confidence: np.ndarray  # (n,) per-sample max probability
    tau: float

    def __len__(self):
        return self.max_confidence.shape[0]


@dataclass(frozen=True)
class PseudoLabels:
    positive: np.ndarray  # (n,) argmax class per sample
    complementary: np.ndarray  # (n,) uniform over the other classes


def select(probs, tau):
    """Partition by max_k p_k > tau (strict). Empty input gives empty sets."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be within [0, 1]")
    probs = np.asarray(probs, dtype=np.float64)
    if probs.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return SelectionSplit(empty, empty, np.empty(0), float(tau))
    max_conf = probs.max(axis=1)
    ambiguous = np.flatnonzero(max_conf > tau)
    noisy = np.flatnonzero(max_conf <= tau)
    return SelectionSplit(ambiguous, noisy, max_conf, float(tau))


def make_pseudo(probs, rng):
    """Pseudo-labels for a batch of probability vectors.

    positive = argmax (ties broken toward the lowest class index),
    complementary = uniform draw from the K-1 remaining classes.
    """
    probs = np.asarray(probs, dtype=np.float64)
    k = probs.shape[1] if probs.ndim == 2 else 0
    if k < 2:
        raise ValueError("pseudo-labels need at least 2 classes")
    positive = probs.argmax(axis=1)
    offsets = rng.integers(1, k, size=positive.shape[0])
    complementary = (positive + offsets) % k
    return PseudoLabels(positive, complementary)
