import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evictsim.distcore import Distribution, Rng, sample, softmax_temp, tv_distance
from evictsim.errors import InvalidInputError


def test_softmax_uniform_logits():
    np.testing.assert_allclose(softmax_temp([0, 0, 0], 1.0).probs, [1 / 3] * 3, atol=1e-15)


def test_softmax_temperature_zero_is_argmax():
    assert softmax_temp([5, 1, 1], 0.0).probs.tolist() == [1.0, 0.0, 0.0]


def test_softmax_temperature_zero_ties_lowest_index():
    assert softmax_temp([1, 3, 3], 0.0).argmax() == 1


def test_softmax_closed_form():
    np.testing.assert_allclose(softmax_temp([math.log(2), 0.0], 1.0).probs, [2 / 3, 1 / 3],
                               atol=1e-15)


@pytest.mark.parametrize("bad", [[0.0, float("nan")], [float("inf"), 1.0]])
def test_softmax_rejects_non_finite(bad):
    with pytest.raises(InvalidInputError):
        softmax_temp(bad, 1.0)


def test_softmax_rejects_negative_temperature():
    with pytest.raises(InvalidInputError):
        softmax_temp([0.0, 1.0], -0.5)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20), st.floats(-100, 100),
       st.floats(0.05, 5.0))
def test_softmax_shift_invariant(logits, shift, temp):
    a = softmax_temp(logits, temp).probs
    b = softmax_temp(np.asarray(logits) + shift, temp).probs
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_distribution_validation():
    with pytest.raises(InvalidInputError):
        Distribution([0.5, 0.6])
    with pytest.raises(InvalidInputError):
        Distribution([1.2, -0.2])
    d = Distribution([0.25, 0.75])
    assert not d.probs.flags.writeable


def test_sample_point_mass():
    rng = Rng(3)
    d = Distribution([0, 0, 1.0, 0])
    assert all(sample(d, rng) == 2 for _ in range(100))


def test_sample_fair_coin_frequency():
    rng = Rng(12345)
    draws = np.array([sample(Distribution([0.5, 0.5]), rng) for _ in range(100_000)])
    freq = draws.mean()
    # Binomial sd at n=1e5 is 0.0016; [0.49, 0.51] is a > 6 sigma band.
    assert 0.49 <= freq <= 0.51


def test_sample_respects_support():
    rng = Rng(99)
    d = Distribution([0.7, 0.0, 0.3])
    counts = np.bincount([sample(d, rng) for _ in range(100_000)], minlength=3)
    assert counts[1] == 0


def test_rng_replay_is_bit_exact():
    a, b = Rng(42), Rng(42)
    assert [a.random() for _ in range(50)] == [b.random() for _ in range(50)]
    assert Rng.derive(1, 2, 3).random() == Rng.derive(1, 2, 3).random()
    assert Rng.derive(1, 2, 3).random() != Rng.derive(1, 2, 4).random()


def test_rng_stream_is_pinned():
    # PCG64 output is platform independent; pin the first draw for seed 0.
    assert Rng(0).random() == np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(0))).random()


def test_tv_distance_examples():
    assert tv_distance(Distribution([0.2, 0.8]), Distribution([0.2, 0.8])) == 0.0
    assert tv_distance(Distribution([1, 0]), Distribution([0, 1])) == 1.0
    assert tv_distance(Distribution([0.5, 0.5]), Distribution([0.75, 0.25])) == pytest.approx(0.25)


def test_tv_distance_length_mismatch():
    with pytest.raises(InvalidInputError):
        tv_distance(Distribution([1.0]), Distribution([0.5, 0.5]))
