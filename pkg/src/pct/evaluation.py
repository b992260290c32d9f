"""Retrieval mAP, correlations, accuracy and the estimator batch-size table."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from pct.coherence import cdf_matrix, dc_exact, dc_minibatch
from pct.errors import InvalidArgument, ShapeMismatch, UndefinedCorrelation
from pct.metric import Metric, cross, get_metric, pairwise_values


@dataclass(frozen=True)
class RetrievalResult:
    map: float
    k: int
    topk_precision: float
    ap: np.ndarray
    missing_class: np.ndarray  # queries whose class is absent from the database


@dataclass(frozen=True)
class CorrelationResult:
    pearson: float
    spearman: float
    n: int


def accuracy(pred, labels) -> float:
    pred, labels = np.asarray(pred), np.asarray(labels)
    if pred.shape != labels.shape:
        raise ShapeMismatch("predictions and labels differ in length")
    return float(np.mean(pred == labels))


def interpolated_ap(relevant) -> float:
    """11-point interpolated average precision of one ranked relevance list."""
    rel = np.asarray(relevant, dtype=bool)
    total = rel.sum()
    if total == 0:
        return 0.0
    hits = np.cumsum(rel)
    precision = hits / np.arange(1, len(rel) + 1)
    # best precision at or beyond each rank, read off at the first rank whose
    # recall reaches level l/10 (compared in integers: hits * 10 >= l * total)
    best_after = np.maximum.accumulate(precision[::-1])[::-1]
    first = np.searchsorted(hits * 10, np.arange(11) * total, side="left")
    # correctly rounded sums keep AP independent of summation order
    return math.fsum(best_after[first].tolist()) / 11


def retrieve_eval(db_feats, db_labels, query_feats, query_labels,
                  metric: Metric | str = "euclidean", k: int = 10) -> RetrievalResult:
    """Rank the database for each query by ascending dissimilarity (ties by
    database index) and score relevance as label equality."""
    db_labels = np.asarray(db_labels)
    query_labels = np.asarray(query_labels)
    if not 1 <= k <= len(db_labels):
        raise InvalidArgument(f"k must lie in [1, {len(db_labels)}], got {k}")
    d = cross(query_feats, db_feats, get_metric(metric))
    order = np.argsort(d, axis=1, kind="stable")
    rel = db_labels[order] == query_labels[:, None]
    ap = np.array([interpolated_ap(r) for r in rel])
    missing = ~rel.any(axis=1)
    return RetrievalResult(math.fsum(ap.tolist()) / len(ap), k, float(rel[:, :k].mean()), ap, missing)


def _check_xy(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise InvalidArgument("need two equal-length sequences of at least 2 values")
    return x, y


def pearson(xs, ys) -> float:
    x, y = _check_xy(xs, ys)
    x = x - x.mean()
    y = y - y.mean()
    sx, sy = np.sqrt(x @ x), np.sqrt(y @ y)
    if sx == 0 or sy == 0:
        raise UndefinedCorrelation("correlation is undefined for a constant sequence")
    return float(np.clip((x @ y) / (sx * sy), -1.0, 1.0))


def spearman(xs, ys) -> float:
    x, y = _check_xy(xs, ys)
    return pearson(rankdata(x), rankdata(y))


def correlate(xs, ys) -> CorrelationResult:
    return CorrelationResult(pearson(xs, ys), spearman(xs, ys), len(xs))


def mean_row_spearman(x1, x2, metric1: Metric | str = "euclidean", metric2: Metric | str = "euclidean") -> float:
    """Mean over reference points of the Spearman correlation between their
    dissimilarities to all other points in the two embeddings."""
    d1 = pairwise_values(np.asarray(x1, dtype=np.float64), get_metric(metric1))
    d2 = pairwise_values(np.asarray(x2, dtype=np.float64), get_metric(metric2))
    n = d1.shape[0]
    off = ~np.eye(n, dtype=bool)
    r1 = rankdata(d1[off].reshape(n, n - 1), axis=1)
    r2 = rankdata(d2[off].reshape(n, n - 1), axis=1)
    r1 -= r1.mean(axis=1, keepdims=True)
    r2 -= r2.mean(axis=1, keepdims=True)
    num = (r1 * r2).sum(axis=1)
    den = np.sqrt((r1 * r1).sum(axis=1) * (r2 * r2).sum(axis=1))
    return float(np.mean(num / den))


@dataclass(frozen=True)
class AblationRow:
    batch_size: int | None  # None marks the exact full-dataset row
    pc: float
    stderr: float | None
    mean_abs_error: float | None


def batch_ablation(x1, x2, metrics, batch_sizes, reps: int, seed: int) -> list[AblationRow]:
    """Mini-batch coherence estimates per batch size, closed by the exact value."""
    sizes = list(batch_sizes)
    if sizes != sorted(sizes):
        raise InvalidArgument("batch sizes must be sorted ascending")
    m1, m2 = (get_metric(m) for m in metrics)
    exact = dc_exact(cdf_matrix(x1, m1), cdf_matrix(x2, m2)).dc
    rows = []
    for b in sizes:
        rep = dc_minibatch(x1, x2, (m1, m2), b, reps, seed)
        rows.append(AblationRow(b, rep.global_phi, rep.stderr, float(np.mean(np.abs(rep.estimates - exact)))))
    rows.append(AblationRow(None, 1.0 - exact, None, None))
    return rows


def ablation_shape(rows, k: float = 2.0) -> tuple[bool, bool]:
    """Check the shape of a :func:`batch_ablation` table.

    Returns ``(monotone, above_limit)``: whether the estimates are
    nonincreasing in B up to ``k`` combined standard errors, and whether each
    estimate lies at or above the exact value minus ``k`` standard errors.
    """
    est = [r for r in rows if r.batch_size is not None]
    exact = rows[-1].pc
    monotone = all(
        b.pc <= a.pc + k * np.hypot(a.stderr, b.stderr) for a, b in zip(est, est[1:])
    )
    above = all(r.pc >= exact - k * r.stderr for r in est)
    return bool(monotone), bool(above)
