import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustgen.rng import Stream


def test_same_key_same_words():
    assert np.array_equal(Stream(1, 2, 3).raw(16), Stream(1, 2, 3).raw(16))


def test_keys_are_distinct():
    assert not np.array_equal(Stream(1, 2).raw(4), Stream(2, 1).raw(4))


def test_uniform_range_and_mean():
    u = Stream(7).uniform(100_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.005


def test_normal_moments():
    z = Stream(8).normal(200_001)
    assert z.shape == (200_001,)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1.0) < 0.01


def test_signs_balanced():
    s = Stream(9).signs(1000, 100)
    assert set(np.unique(s)) == {-1.0, 1.0}
    assert abs(s.mean()) < 0.01


def test_below_bad_bound():
    with pytest.raises(ValueError):
        Stream(0).below(0)


def test_sample_indices_too_many():
    with pytest.raises(ValueError):
        Stream(0).sample_indices(3, 4)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.data())
def test_sample_indices_distinct_in_range(population, data):
    k = data.draw(st.integers(0, population))
    idx = Stream(population, k).sample_indices(population, k)
    assert len(set(idx.tolist())) == k
    assert all(0 <= i < population for i in idx)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300))
def test_permutation_is_permutation(n):
    assert sorted(Stream(n).permutation(n).tolist()) == list(range(n))


def test_below_roughly_uniform():
    s = Stream(11)
    counts = np.bincount([s.below(5) for _ in range(5000)], minlength=5)
    assert counts.min() > 900
