"""Perception-coherence levels, the Difference Coefficient and its mini-batch
estimator, plus frequency probes for the rank/order preservation bounds.

A finite point set is treated as the ground-truth distribution: the exact
cumulative function of a pair ``(i, j)`` is the normalized hard rank of
``d(x_i, x_j)`` in row ``i`` of the full dissimilarity matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from pct.errors import InvalidArgument, ShapeMismatch, TieError
from pct.metric import DissimMatrix, Metric, get_metric, pairwise_values
from pct.ranking import EmpiricalCdfMatrix, hard_rank_values, min_row_gap
from pct.rng import stream


@dataclass(frozen=True)
class CoherenceReport:
    per_point_phi: np.ndarray | None
    global_phi: float
    dc: float
    method: str  # "exact_full" or "minibatch"
    stderr: float | None = None
    batch_size: int | None = None
    replications: int | None = None
    estimates: np.ndarray | None = None  # per-replication DC estimates


@dataclass(frozen=True)
class ThetaProbeResult:
    conditional_frequency: float | None
    bound_params: tuple[float, ...]
    samples: int
    condition_hits: int
    event_hits: int


def _cdf(F) -> np.ndarray:
    return F.values if isinstance(F, EmpiricalCdfMatrix) else np.asarray(F, dtype=np.float64)


def _pair(F1, F2) -> tuple[np.ndarray, np.ndarray]:
    a, b = _cdf(F1), _cdf(F2)
    if a.shape != b.shape or a.ndim != 2:
        raise ShapeMismatch(f"cumulative matrices differ in shape: {a.shape} vs {b.shape}")
    return a, b


def phi_at(i: int, F1, F2) -> float:
    a, b = _pair(F1, F2)
    return 1.0 - float(np.mean(np.abs(a[i] - b[i])))


def dc_exact(F1, F2) -> CoherenceReport:
    a, b = _pair(F1, F2)
    gap = np.abs(a - b)
    dc = float(np.mean(gap))
    return CoherenceReport(1.0 - gap.mean(axis=1), 1.0 - dc, dc, "exact_full")


def cdf_matrix(x, metric: Metric | str) -> np.ndarray:
    """Exact cumulative matrix of a point set under its own empirical distribution."""
    x = np.asarray(x, dtype=np.float64)
    return hard_rank_values(pairwise_values(x, get_metric(metric))) / x.shape[0]


def coherence(x1, x2, metric1: Metric | str, metric2: Metric | str) -> CoherenceReport:
    """Exact report for two embeddings of the same N points."""
    if len(x1) != len(x2):
        raise ShapeMismatch(f"embeddings hold {len(x1)} and {len(x2)} points")
    return dc_exact(cdf_matrix(x1, metric1), cdf_matrix(x2, metric2))


def global_phi(x1, x2, metric1: Metric | str = "euclidean", metric2: Metric | str = "euclidean") -> float:
    return coherence(x1, x2, metric1, metric2).global_phi


def _batch_dc(x1: np.ndarray, x2: np.ndarray, idx: np.ndarray, m1: Metric, m2: Metric) -> float:
    b = len(idx)
    r1 = hard_rank_values(pairwise_values(x1[idx], m1))
    r2 = hard_rank_values(pairwise_values(x2[idx], m2))
    # ranks are integers: summing the integer gaps first keeps the estimate exact
    return float(np.abs(r1 - r2).sum()) / b**3


def dc_minibatch(x1, x2, metrics, batch_size: int, reps: int, seed: int) -> CoherenceReport:
    """Monte-Carlo estimate of DC from batches drawn i.i.d. with replacement.

    Replication ``r`` owns the stream ``(seed, "minibatch", batch_size, r)``,
    so results do not depend on evaluation order.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    m1, m2 = (get_metric(m) for m in metrics)
    n = x1.shape[0]
    if x2.shape[0] != n:
        raise ShapeMismatch(f"embeddings hold {n} and {x2.shape[0]} points")
    if batch_size < 2 or batch_size > n:
        raise InvalidArgument(f"batch size must lie in [2, {n}], got {batch_size}")
    if reps < 1:
        raise InvalidArgument("reps must be >= 1")
    est = np.empty(reps)
    for r in range(reps):
        idx = stream(seed, "minibatch", batch_size, r).integers(0, n, size=batch_size)
        est[r] = _batch_dc(x1, x2, idx, m1, m2)
    dc = float(est.mean())
    se = float(est.std(ddof=1) / np.sqrt(reps)) if reps > 1 else None
    return CoherenceReport(None, 1.0 - dc, dc, "minibatch", se, batch_size, reps, est)


def dc_minibatch_expectation(x1, x2, metrics, batch_size: int) -> float:
    """Exact expectation of the mini-batch estimator by enumerating all
    ``N**B`` ordered batches. Oracle for tiny sets only."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    m1, m2 = (get_metric(m) for m in metrics)
    n = x1.shape[0]
    if n > 40 or n**batch_size > 10**6:
        raise InvalidArgument(f"enumeration of {n}**{batch_size} batches is too large")
    total = 0.0
    for idx in itertools.product(range(n), repeat=batch_size):
        total += _batch_dc(x1, x2, np.array(idx), m1, m2)
    return total / n**batch_size


def cdf_minibatch(x, metric: Metric | str, ref: int, other: int, batch_size: int, reps: int, seed: int) -> np.ndarray:
    """Per-replication estimates of the cumulative function at ``(x_ref, x_other)``
    from batches of i.i.d. draws of the point set."""
    x = np.asarray(x, dtype=np.float64)
    m = get_metric(metric)
    row = pairwise_values(x, m)[ref]
    thresh = row[other]
    rng = stream(seed, "cdf_minibatch", batch_size)
    draws = rng.integers(0, x.shape[0], size=(reps, batch_size))
    return np.mean(row[draws] <= thresh, axis=1)


def rate_fit(errors) -> float:
    """Least-squares slope of log(error) against log(B)."""
    pts = [(float(b), float(e)) for b, e in errors]
    if len({b for b, _ in pts}) < 4:
        raise InvalidArgument("need at least 4 distinct batch sizes")
    if any(e <= 0 or b <= 0 for b, e in pts):
        raise InvalidArgument("batch sizes and errors must be positive")
    lb = np.log([b for b, _ in pts])
    le = np.log([e for _, e in pts])
    return float(np.polyfit(lb, le, 1)[0])


def _dm(dm) -> np.ndarray:
    return dm.values if isinstance(dm, DissimMatrix) else np.asarray(dm, dtype=np.float64)


def is_absolutely_coherent(dm1, dm2) -> bool:
    """True when every reference row orders the other points identically."""
    a, b = _dm(dm1), _dm(dm2)
    if a.shape != b.shape:
        raise ShapeMismatch(f"dissimilarity matrices differ in shape: {a.shape} vs {b.shape}")
    if min_row_gap(a) == 0.0 or min_row_gap(b) == 0.0:
        raise TieError("absolute coherence is only checked on tie-free rows")
    return bool(np.array_equal(hard_rank_values(a), hard_rank_values(b)))


_ENUMERATION_LIMIT = 10**6


def _triples(n: int, samples: int | None, seed: int, exhaustive: bool | None):
    """Yield ``(i, j, k)`` index arrays, chunked by reference point when enumerating."""
    if exhaustive is None:
        exhaustive = n**3 <= _ENUMERATION_LIMIT
    if exhaustive:
        jj, kk = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        jj, kk = jj.ravel(), kk.ravel()
        for i in range(n):
            yield np.full(jj.shape, i), jj, kk
        return
    if samples is None or samples < 1:
        raise InvalidArgument("sampling mode needs samples >= 1")
    rng = stream(seed, "probe")
    chunk = 100_000
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        t = rng.integers(0, n, size=(3, m))
        yield t[0], t[1], t[2]
        done += m


def _probe(F1, F2, cond, event, params, samples, seed, exhaustive) -> ThetaProbeResult:
    a, b = _pair(F1, F2)
    n = a.shape[0]
    total = hits = events = 0
    for i, j, k in _triples(n, samples, seed, exhaustive):
        c = cond(a[i, j], a[i, k])
        total += len(i)
        hits += int(c.sum())
        events += int((c & event(b[i, j], b[i, k])).sum())
    freq = events / hits if hits else None
    return ThetaProbeResult(freq, params, total, hits, events)


def probe_rank_preservation(F1, F2, eps1: float, eps2: float, samples: int | None = None,
                            seed: int = 0, exhaustive: bool | None = None) -> ThetaProbeResult:
    """Frequency of ``|F2[i,j] - F2[i,k]| >= eps2`` among triples with
    ``|F1[i,j] - F1[i,k]| <= eps1``.

    Triples are enumerated when ``N**3 <= 1e6`` unless ``exhaustive`` says
    otherwise; otherwise ``samples`` uniform triples are drawn.
    """
    if not eps2 > eps1 > 0:
        raise InvalidArgument(f"need eps2 > eps1 > 0, got eps1={eps1}, eps2={eps2}")
    return _probe(
        F1, F2,
        lambda p, q: np.abs(p - q) <= eps1,
        lambda p, q: np.abs(p - q) >= eps2,
        (eps1, eps2), samples, seed, exhaustive,
    )


def probe_order_preservation(F1, F2, eps: float, samples: int | None = None,
                             seed: int = 0, exhaustive: bool | None = None) -> ThetaProbeResult:
    """Frequency of ``F2[i,j] - F2[i,k] >= eps`` among triples with ``F1[i,j] <= F1[i,k]``."""
    if not eps > 0:
        raise InvalidArgument(f"eps must be positive, got {eps}")
    return _probe(
        F1, F2,
        lambda p, q: p <= q,
        lambda p, q: p - q >= eps,
        (eps,), samples, seed, exhaustive,
    )
