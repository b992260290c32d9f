"""Euclidean and cosine dissimilarities and pairwise dissimilarity matrices.

Scalar, cross and pairwise evaluations share one row kernel that sums over
the feature axis in a fixed left-to-right order, so a matrix entry equals the
scalar metric on the same two rows bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from pct.errors import InvalidArgument, ShapeMismatch


@dataclass(frozen=True)
class Metric:
    kind: Literal["euclidean", "cosine"]
    eps: float = 1e-12

    def __post_init__(self):
        if self.kind not in ("euclidean", "cosine"):
            raise InvalidArgument(f"unknown metric kind {self.kind!r}")
        if not self.eps > 0:
            raise InvalidArgument("eps must be positive")


EUCLIDEAN = Metric("euclidean")
COSINE = Metric("cosine")


def get_metric(kind: str | Metric) -> Metric:
    return kind if isinstance(kind, Metric) else Metric(kind)


@dataclass(frozen=True)
class DissimMatrix:
    values: np.ndarray
    metric: Metric
    source: str = ""

    @property
    def size(self) -> int:
        return self.values.shape[0]


def _dot_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    acc = a[..., 0] * b[..., 0]
    for k in range(1, a.shape[-1]):
        acc = acc + a[..., k] * b[..., k]
    return acc


def _kernel(a: np.ndarray, b: np.ndarray, metric: Metric) -> np.ndarray:
    """Metric between matching rows of ``a`` and ``b`` (shape ``(..., D)``)."""
    if metric.kind == "euclidean":
        diff = a - b
        return np.sqrt(_dot_rows(diff, diff))
    na = np.maximum(np.sqrt(_dot_rows(a, a)), metric.eps)
    nb = np.maximum(np.sqrt(_dot_rows(b, b)), metric.eps)
    return np.clip(0.5 * (1.0 - _dot_rows(a, b) / (na * nb)), 0.0, 1.0)


def _vec_pair(u, v) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or u.shape != v.shape or u.size == 0:
        raise ShapeMismatch(f"vectors must share one dimension, got {u.shape} and {v.shape}")
    return u, v


def euclidean(u, v) -> float:
    u, v = _vec_pair(u, v)
    return float(_kernel(u[None], v[None], EUCLIDEAN)[0])


def cosine_dissim(u, v, eps: float = 1e-12) -> float:
    """Half of one minus the cosine similarity; norms below ``eps`` are clamped."""
    u, v = _vec_pair(u, v)
    return float(_kernel(u[None], v[None], Metric("cosine", eps))[0])


def _check_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch(f"expected a B x D matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("non-finite input to dissimilarity")
    return x


_TRIU_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _triu(b: int) -> tuple[np.ndarray, np.ndarray]:
    idx = _TRIU_CACHE.get(b)
    if idx is None:
        idx = _TRIU_CACHE.setdefault(b, np.triu_indices(b, 1))
    return idx


def pairwise_values(x: np.ndarray, metric: Metric) -> np.ndarray:
    """Raw symmetric matrix; the upper triangle is computed once and mirrored."""
    b = x.shape[0]
    iu, ju = _triu(b)
    out = np.zeros((b, b))
    vals = _kernel(x[iu], x[ju], metric)
    out[iu, ju] = vals
    out[ju, iu] = vals
    return out


def pairwise(x, metric: Metric | str = EUCLIDEAN, source: str = "") -> DissimMatrix:
    metric = get_metric(metric)
    x = _check_matrix(x)
    if x.shape[0] < 2:
        raise InvalidArgument(f"pairwise needs at least 2 rows, got {x.shape[0]}")
    return DissimMatrix(pairwise_values(x, metric), metric, source)


def cross(a, b, metric: Metric | str = EUCLIDEAN) -> np.ndarray:
    """``out[q, j] = d(a[q], b[j])`` for a query block against a database block."""
    metric = get_metric(metric)
    a, b = _check_matrix(a), _check_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise ShapeMismatch(f"feature dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    return _kernel(a[:, None, :], b[None, :, :], metric)
