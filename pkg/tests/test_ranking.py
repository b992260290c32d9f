import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pct.errors import InvalidArgument, TieError
from pct.metric import pairwise
from pct.ranking import (
    RankConfig,
    empirical_cdf,
    hard_ranks,
    sigmoid,
    soft_rank_limit_check,
    soft_ranks,
)


def count_ranks(d):
    """Brute-force oracle: r[i, j] = #{k : d[i, k] <= d[i, j]}."""
    d = np.asarray(d, dtype=float)
    b = d.shape[0]
    return np.array([[sum(d[i, k] <= d[i, j] for k in range(b)) for j in range(b)] for i in range(b)])


def scalar_soft_rank(row, j, tau):
    return sum(1.0 / (1.0 + math.exp(-(row[j] - row[k]) / tau)) for k in range(len(row)))


def random_dm(seed, b=6, d=2):
    return pairwise(np.random.default_rng(seed).normal(size=(b, d)))


def test_hard_rank_rows():
    d = np.array([[0, 2, 1, 5], [2, 0, 3, 1], [1, 3, 0, 4], [5, 1, 4, 0]], float)
    r = hard_ranks(d).values
    assert r[0].tolist() == [1, 3, 2, 4]
    np.testing.assert_array_equal(r, count_ranks(d))


def test_hard_rank_ties_share_max():
    d = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], float)
    assert hard_ranks(d).values[0].tolist() == [1, 3, 3]


@given(st.integers(2, 10), st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_hard_ranks_match_counting(b, seed):
    x = np.random.default_rng(seed).integers(0, 3, size=(b, 2)).astype(float)  # ties on purpose
    dm = pairwise(x)
    np.testing.assert_array_equal(hard_ranks(dm).values, count_ranks(dm.values))


def test_soft_rank_worked_example():
    d = np.array([[0.0, 2.0, 1.0], [2.0, 0.0, 3.0], [1.0, 3.0, 0.0]])
    oracle = scalar_soft_rank([0.0, 2.0, 1.0], 1, 0.5)
    assert oracle == pytest.approx(2.362811, abs=1e-6)
    assert soft_ranks(d, RankConfig(0.5)).values[0, 1] == pytest.approx(oracle, rel=1e-14)


@given(st.integers(2, 9), st.floats(0.01, 5.0), st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_soft_ranks_match_scalar_oracle(b, tau, seed):
    dm = random_dm(seed, b)
    r = soft_ranks(dm, RankConfig(tau)).values
    for i in range(b):
        for j in range(b):
            assert r[i, j] == pytest.approx(scalar_soft_rank(dm.values[i], j, tau), rel=1e-12, abs=1e-12)


@given(st.integers(2, 9), st.floats(0.01, 5.0), st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_soft_rank_bounds_and_monotone(b, tau, seed):
    d = random_dm(seed, b).values
    r = soft_ranks(d, tau).values
    assert np.all((r > 0) & (r < b))
    for i in range(b):
        order = np.argsort(d[i])
        assert np.all(np.diff(r[i, order]) > 0)
        # row minimum: self term 0.5 plus B - 1 terms each below 0.5
        assert 0.5 <= r[i, order[0]] < (b + 1) / 2


def test_row_minimum_three_points():
    d = random_dm(4, 3).values
    r = soft_ranks(d, 10.0).values
    for i in range(3):
        assert 0.5 < r[i, i] < 1.5


def test_soft_rank_equal_offdiagonal():
    d = np.ones((4, 4)) - np.eye(4)
    r = soft_ranks(d, 0.3).values
    off = r[~np.eye(4, dtype=bool)]
    assert np.all(off == off[0])


@given(st.integers(2, 8), st.floats(-50, 50), st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_soft_rank_shift_invariance(b, c, seed):
    d = random_dm(seed, b).values
    np.testing.assert_allclose(soft_ranks(d + c, 0.2).values, soft_ranks(d, 0.2).values, atol=1e-9)


@given(st.integers(2, 8), st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_hard_rank_monotone_transform_invariance(b, seed):
    d = random_dm(seed, b).values
    for f in (np.exp, lambda v: 3 * v + 7, np.sqrt):
        np.testing.assert_array_equal(hard_ranks(f(d)).values, hard_ranks(d).values)
        np.testing.assert_array_equal(empirical_cdf(f(d)).values, empirical_cdf(d).values)


def test_limit_check_bound():
    for seed in range(10):
        d = random_dm(seed, 8).values
        s = np.sort(d, axis=1)
        g = np.min(np.diff(s, axis=1))
        # each non-self term is off by at most sigmoid(-50) < 2e-22
        assert soft_rank_limit_check(d, g / 50) <= 1e-6


def test_limit_two_points():
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    r = soft_ranks(d, 0.01).values
    np.testing.assert_allclose(r[0], [0.5, 1.5], atol=1e-12)
    assert hard_ranks(d).values[0].tolist() == [1, 2]


def test_limit_monotone_in_inverse_tau():
    d = random_dm(3, 7).values
    devs = [soft_rank_limit_check(d, t) for t in (1.0, 0.3, 0.1, 0.03, 0.01, 0.001)]
    assert all(a >= b for a, b in zip(devs, devs[1:]))


def test_limit_refuses_ties():
    d = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 2.0], [1.0, 2.0, 0.0]])
    with pytest.raises(TieError):
        soft_rank_limit_check(d, 0.01)


def test_large_tau_tends_to_half_b():
    d = random_dm(1, 5).values
    np.testing.assert_allclose(soft_ranks(d, 1e9).values, 2.5, atol=1e-6)


def test_sigmoid_no_overflow():
    z = np.array([-1000.0, -700.5, 0.0, 700.5, 1000.0])
    with np.errstate(all="raise"):
        s = sigmoid(z)
    assert s.tolist() == [0.0, 0.0, 0.5, 1.0, 1.0]


def test_empirical_cdf_line():
    f = empirical_cdf(pairwise(np.array([[0.0], [1.0], [3.0]]))).values
    assert f[0, 1] == pytest.approx(2 / 3)
    np.testing.assert_allclose(np.diag(f), 1 / 3)
    np.testing.assert_allclose(f.max(axis=1), 1.0)


@given(st.integers(2, 10), st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_cdf_row_sums(b, seed):
    f = empirical_cdf(random_dm(seed, b)).values
    np.testing.assert_allclose(f.sum(axis=1), (b + 1) / 2)


def test_rank_config_validation():
    with pytest.raises(InvalidArgument):
        RankConfig(0.0)
    with pytest.raises(InvalidArgument):
        soft_ranks(np.zeros((1, 1)), 0.1)
