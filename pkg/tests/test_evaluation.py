import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pct.errors import InvalidArgument, UndefinedCorrelation
from pct.evaluation import (
    ablation_shape,
    accuracy,
    batch_ablation,
    correlate,
    interpolated_ap,
    mean_row_spearman,
    pearson,
    retrieve_eval,
    spearman,
)
from pct.coherence import coherence

from oracles import ap_oracle, retrieval_oracle

# ten published (coherence, probe accuracy) checkpoint pairs; their Pearson r is 0.920
PUBLISHED_PHI = [0.841, 0.877, 0.889, 0.901, 0.911, 0.921, 0.931, 0.940, 0.949, 0.956]
PUBLISHED_ACC = [82.00, 83.50, 83.25, 85.75, 86.75, 88.00, 86.75, 89.25, 87.00, 90.00]


def test_single_relevant_first():
    assert interpolated_ap([1]) == 1.0
    assert interpolated_ap([1, 0, 0]) == 1.0


def test_four_item_pattern():
    # ranks 1..4 relevance (1,0,1,0): precision 1, .5, 2/3, .5; recall .5 at rank 1, 1 at rank 3
    assert interpolated_ap([1, 0, 1, 0]) == pytest.approx((6 * 1.0 + 5 * (2 / 3)) / 11, abs=1e-15)
    assert interpolated_ap([1, 0, 1, 0]) == ap_oracle([1, 0, 1, 0])


def test_no_relevant_is_zero():
    assert interpolated_ap([0, 0, 0]) == 0.0


@given(st.lists(st.integers(0, 1), min_size=1, max_size=40))
@settings(max_examples=200, deadline=None)
def test_ap_matches_oracle(rel):
    assert interpolated_ap(rel) == ap_oracle(rel)


@given(st.integers(1, 20), st.integers(1, 10), st.integers(1, 3), st.integers(1, 4), st.data())
@settings(max_examples=100, deadline=None)
def test_retrieval_matches_oracle(n_db, n_q, d, classes, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 10**6)))
    db = rng.integers(0, 4, size=(n_db, d)).astype(float)  # small integers: ties on purpose
    q = rng.integers(0, 4, size=(n_q, d)).astype(float)
    db_labels = rng.integers(0, classes, size=n_db)
    q_labels = rng.integers(0, classes, size=n_q)
    k = data.draw(st.integers(1, n_db))
    res = retrieve_eval(db, db_labels, q, q_labels, "euclidean", k)
    aps, topk = retrieval_oracle(db.tolist(), db_labels, q.tolist(), q_labels, k)
    assert res.ap.tolist() == aps
    assert res.map == math.fsum(aps) / n_q
    assert res.topk_precision == pytest.approx(np.mean(topk), abs=1e-15)
    assert 0.0 <= res.map <= 1.0


def test_missing_class_scores_zero_and_is_flagged():
    db = np.array([[0.0], [1.0]])
    res = retrieve_eval(db, [0, 0], np.array([[0.5], [0.2]]), np.array([1, 0]), "euclidean", 1)
    assert res.ap.tolist() == [0.0, 1.0]
    assert res.missing_class.tolist() == [True, False]
    assert res.map == 0.5


def test_map_invariant_under_monotone_transform():
    rng = np.random.default_rng(1)
    db, q = rng.normal(size=(30, 3)), rng.normal(size=(8, 3))
    dl, ql = rng.integers(0, 3, 30), rng.integers(0, 3, 8)
    a = retrieve_eval(db, dl, q, ql, "euclidean", 5)
    b = retrieve_eval(3 * db + 1, dl, 3 * q + 1, ql, "euclidean", 5)  # all distances scale by 3
    assert a.ap.tolist() == b.ap.tolist()


def test_random_ranking_near_prior():
    rng = np.random.default_rng(7)
    db, q = rng.normal(size=(2000, 4)), rng.normal(size=(50, 4))
    res = retrieve_eval(db, np.arange(2000) % 2, q, np.arange(50) % 2, "euclidean", 10)
    assert abs(res.map - 0.5) <= 0.05


def test_k_validation():
    with pytest.raises(InvalidArgument):
        retrieve_eval(np.zeros((3, 2)), [0, 1, 0], np.zeros((1, 2)), [0], "euclidean", 4)


def test_accuracy():
    assert accuracy([0, 1, 1, 0], [0, 1, 0, 0]) == 0.75


def test_pearson_linear():
    xs = np.arange(10.0)
    assert pearson(xs, 2 * xs + 3) == pytest.approx(1.0, abs=1e-15)
    assert pearson(xs, -xs) == pytest.approx(-1.0, abs=1e-15)


def test_published_coherence_accuracy_pearson():
    assert pearson(PUBLISHED_PHI, PUBLISHED_ACC) == pytest.approx(0.920, abs=0.005)


def test_spearman_reversed():
    assert spearman([1, 2, 3, 4], [9, 7, 5, 1]) == pytest.approx(-1.0, abs=1e-15)


@given(st.lists(st.integers(-1000, 1000), min_size=3, max_size=20, unique=True), st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_spearman_monotone_invariance(ints, seed):
    xs = [i / 10 for i in ints]  # well separated, so the transforms stay strictly increasing in floats
    ys = np.random.default_rng(seed).normal(size=len(xs))
    base = spearman(xs, ys)
    assert spearman(np.exp(np.asarray(xs) / 50), ys) == pytest.approx(base, abs=1e-12)
    assert spearman(xs, ys**3) == pytest.approx(base, abs=1e-12)
    r = correlate(xs, ys)
    assert abs(r.pearson) <= 1 and abs(r.spearman) <= 1 and r.n == len(xs)


def test_zero_variance():
    with pytest.raises(UndefinedCorrelation):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(InvalidArgument):
        pearson([1], [1])


def test_mean_row_spearman():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(25, 3))
    assert mean_row_spearman(x, 5 * x + 2) == pytest.approx(1.0)
    assert mean_row_spearman(x, rng.normal(size=(25, 2))) < 0.5


def _pair(n=300, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 2))
    return x, np.column_stack([x[:, 0] ** 3, np.tanh(x[:, 1])])


def test_batch_ablation_identical_is_one():
    x, _ = _pair(60)
    rows = batch_ablation(x, x, ("euclidean", "euclidean"), [4, 16], 20, 0)
    assert [r.pc for r in rows] == [1.0, 1.0, 1.0]
    assert rows[-1].batch_size is None and rows[-1].stderr is None


def test_batch_ablation_decreases_toward_exact():
    x, y = _pair()
    rows = batch_ablation(x, y, ("euclidean", "euclidean"), [4, 8, 16, 32], 300, 1)
    assert rows[-1].pc == pytest.approx(coherence(x, y, "euclidean", "euclidean").global_phi)
    assert ablation_shape(rows) == (True, True)
    assert rows[0].pc > rows[-1].pc


def test_batch_ablation_converges_with_many_reps():
    x, y = _pair(60, 2)
    rows = batch_ablation(x, y, ("euclidean", "euclidean"), [60], 2000, 3)
    # with B = N the remaining gap is the estimator's finite-batch bias
    est, exact = rows[0], rows[-1]
    assert abs(est.pc - exact.pc) < 0.02


def test_batch_ablation_requires_sorted():
    x, y = _pair(20)
    with pytest.raises(InvalidArgument):
        batch_ablation(x, y, ("euclidean", "euclidean"), [8, 4], 5, 0)
