"""Sample-selection and pseudo-label contracts."""

import numpy as np
import pytest

from pars import selection
from pars.rng import stream


def test_above_threshold_is_ambiguous():
    split = selection.select([[0.96, 0.04]], tau=0.95)
    assert list(split.ambiguous) == [0] and len(split.noisy) == 0


def test_exact_threshold_is_noisy():
    split = selection.select([[0.95, 0.05]], tau=0.95)
    assert list(split.noisy) == [0] and len(split.ambiguous) == 0


def test_tau_one_marks_everything_noisy():
    probs = np.random.default_rng(0).dirichlet(np.ones(4), size=32)
    split = selection.select(probs, tau=1.0)
    assert len(split.noisy) == 32 and len(split.ambiguous) == 0


def test_empty_input_gives_empty_split():
    split = selection.select(np.empty((0, 3)), tau=0.5)
    assert len(split.ambiguous) == 0 and len(split.noisy) == 0


def test_select_rejects_bad_tau():
    with pytest.raises(ValueError):
        selection.select([[1.0, 0.0]], tau=1.5)


def test_select_matches_bruteforce_definition():
    rng = np.random.default_rng(1)
    for _ in range(300):
        n = int(rng.integers(1, 20))
        k = int(rng.integers(2, 7))
        probs = rng.dirichlet(np.ones(k), size=n)
        tau = float(rng.uniform(0, 1))
        split = selection.select(probs, tau)
        expect_amb = [i for i in range(n) if max(probs[i]) > tau]
        expect_noisy = [i for i in range(n) if max(probs[i]) <= tau]
        assert list(split.ambiguous) == expect_amb
        assert list(split.noisy) == expect_noisy
        # partition property
        merged = sorted(list(split.ambiguous) + list(split.noisy))
        assert merged == list(range(n))


def test_select_depends_only_on_max_value():
    # Redistributing the non-max mass never changes the split.
    rng = np.random.default_rng(2)
    for _ in range(100):
        n, k = 12, 5
        probs = rng.dirichlet(np.ones(k), size=n)
        tau = float(rng.uniform(0, 1))
        base = selection.select(probs, tau)
        shuffled = probs.copy()
        for i in range(n):
            top = shuffled[i].argmax()
            rest = np.delete(shuffled[i], top)
            rest = rng.permutation(rest)
            rest = rest * 0.999  # shrink others, keep the max the max
            slack = (1.0 - shuffled[i][top] - rest.sum()) / (k - 1)
            row = np.insert(rest + slack, top, shuffled[i][top])
            shuffled[i] = row
        after = selection.select(shuffled, tau)
        np.testing.assert_array_equal(base.ambiguous, after.ambiguous)
        np.testing.assert_array_equal(base.noisy, after.noisy)


def test_pseudo_argmax_and_tiebreak():
    labels = selection.make_pseudo(
        [[0.1, 0.7, 0.2], [1 / 3, 1 / 3, 1 / 3]], stream(0, "pseudo")
    )
    assert labels.positive[0] == 1
    assert labels.positive[1] == 0  # lowest index on ties
    assert labels.complementary[0] in (0, 2)


def test_pseudo_never_returns_complement_equal_to_argmax():
    rng = stream(1, "pseudo")
    probs = np.random.default_rng(3).dirichlet(np.ones(6), size=500)
    labels = selection.make_pseudo(probs, rng)
    assert (labels.complementary != labels.positive).all()
    assert ((labels.complementary >= 0) & (labels.complementary < 6)).all()


def test_pseudo_complement_is_uniform_over_other_classes():
    probs = np.tile([0.05, 0.6, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.03, 0.02], (10000, 1))
    labels = selection.make_pseudo(probs, stream(2, "pseudo"))
    assert (labels.positive == 1).all()
    freq = np.bincount(labels.complementary, minlength=10) / 10000
    assert freq[1] == 0.0
    others = np.delete(freq, 1)
    assert np.abs(others - 1.0 / 9.0).max() < 0.02


def test_pseudo_requires_two_classes():
    with pytest.raises(ValueError):
        selection.make_pseudo(np.ones((3, 1)), stream(0, "pseudo"))
