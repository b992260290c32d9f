"""Soft-rank coherence loss and its analytic gradients.

For a batch of B points with teacher dissimilarities ``t`` and student
dissimilarities ``s``::

    R[i, j] = sum_k sigmoid((d[i, j] - d[i, k]) / tau)
    L       = sum_{i, j} (R_s[i, j] - R_t[i, j]) ** 2 / B**3

Teacher ranks are constants. With ``g[i, j] = 2 (R_s - R_t)[i, j] / (B**3 tau_s)``
and ``P[i, j, k] = sigmoid'((s[i, j] - s[i, k]) / tau_s)``::

    dL/ds[i, m] = g[i, m] * sum_k P[i, m, k] - sum_j g[i, j] * P[i, j, m]

The ``k = j`` self term appears in both sums and cancels.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass

import numpy as np

from pct.errors import InvalidArgument, ShapeMismatch
from pct.metric import DissimMatrix
from pct.ranking import RankMatrix, tanh_cube

_GUARD = 1e-12


class CoincidentPointsWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class LossConfig:
    tau_teacher: float = 0.1
    tau_student: float = 0.1
    weight: float = 1.0

    def __post_init__(self):
        if not (self.tau_teacher > 0 and self.tau_student > 0):
            raise InvalidArgument("temperatures must be positive")
        if self.weight < 0:
            raise InvalidArgument("weight must be nonnegative")


@dataclass(frozen=True)
class LossResult:
    value: float
    grad_student_dissim: np.ndarray
    teacher_ranks: RankMatrix
    student_ranks: RankMatrix
    student_dissim: np.ndarray


_local = threading.local()


def _cubes(b: int) -> tuple[np.ndarray, np.ndarray]:
    # two reusable B^3 buffers; fresh allocations dominate the cost at B = 64
    cache = getattr(_local, "cubes", None)
    if cache is None or cache[0].shape[0] != b:
        cache = (np.empty((b, b, b)), np.empty((b, b, b)))
        _local.cubes = cache
    return cache


def loss_and_grad(dt: np.ndarray, ds: np.ndarray, tau_t: float, tau_s: float):
    """Array-level kernel: ``(value, dL/ds, teacher ranks, student ranks)``.

    Uses ``S = (1 + T) / 2`` with ``T = tanh(./(2 tau))``, hence
    ``R = B/2 + sum_k T / 2`` and ``sigmoid' = (1 - T**2) / 4``.
    """
    b = dt.shape[0]
    cube_t, cube_s = _cubes(b)
    rt = 0.5 * b + 0.5 * tanh_cube(dt, tau_t, cube_t).sum(axis=2)
    T = tanh_cube(ds, tau_s, cube_s)
    rs = 0.5 * b + 0.5 * T.sum(axis=2)
    diff = rs - rt
    value = float(np.vdot(diff, diff)) / b**3
    g = diff * (2.0 / (b**3 * tau_s))
    T2 = np.multiply(T, T, out=T)
    # sum_k P[i, m, k] and sum_j g[i, j] P[i, j, m] with P = (1 - T2) / 4
    p_rows = 0.25 * (b - T2.sum(axis=2))
    g_p = 0.25 * (g.sum(axis=1)[:, None] - np.matmul(g[:, None, :], T2)[:, 0, :])
    grad = g * p_rows - g_p
    return value, grad, rt, rs


def _values(dm) -> np.ndarray:
    return dm.values if isinstance(dm, DissimMatrix) else np.asarray(dm, dtype=np.float64)


def coherence_loss(dm_teacher, dm_student, cfg: LossConfig) -> LossResult:
    dt, ds = _values(dm_teacher), _values(dm_student)
    if dt.shape != ds.shape or dt.ndim != 2 or dt.shape[0] != dt.shape[1]:
        raise ShapeMismatch(f"teacher {dt.shape} and student {ds.shape} must be equal square matrices")
    if dt.shape[0] < 2:
        raise InvalidArgument("batch size must be >= 2")
    value, grad, rt, rs = loss_and_grad(dt, ds, cfg.tau_teacher, cfg.tau_student)
    w = cfg.weight
    return LossResult(
        w * value, w * grad,
        RankMatrix(rt, "soft", cfg.tau_teacher), RankMatrix(rs, "soft", cfg.tau_student), ds,
    )


def coords_grad(grad_d: np.ndarray, d: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, bool]:
    """Chain ``dL/dd`` through Euclidean distances; returns ``(grad, coincident)``."""
    w = grad_d + grad_d.T
    np.fill_diagonal(w, 0.0)
    off = ~np.eye(len(d), dtype=bool)
    coincident = bool(np.any(d[off] < _GUARD))
    w = w / np.maximum(d, _GUARD)
    return points * w.sum(axis=1)[:, None] - w @ points, coincident


def grad_wrt_coords(lr: LossResult, points) -> np.ndarray:
    """Gradient of the loss with respect to the raw student coordinates.

    Coincident points use a guarded denominator and emit
    :class:`CoincidentPointsWarning`.
    """
    points = np.asarray(points, dtype=np.float64)
    grad, coincident = coords_grad(lr.grad_student_dissim, lr.student_dissim, points)
    if coincident:
        warnings.warn("coincident student points; distance gradient guarded", CoincidentPointsWarning)
    return grad


def features_grad(grad_d: np.ndarray, feats: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    w = grad_d + grad_d.T
    np.fill_diagonal(w, 0.0)
    norms = np.sqrt(np.einsum("ij,ij->i", feats, feats))
    nc = np.maximum(norms, eps)
    cos = (feats @ feats.T) / np.outer(nc, nc)
    # d/du of 0.5 (1 - cos(u, v)) = -0.5 (v / (|u||v|) - cos u / |u|^2); the
    # second term vanishes where |u| is clamped (the clamped norm is constant)
    radial = np.where(norms > eps, (w * cos).sum(axis=1) / nc**2, 0.0)
    return -0.5 * ((w / np.outer(nc, nc)) @ feats) + 0.5 * radial[:, None] * feats


def grad_wrt_features(lr: LossResult, feats, eps: float = 1e-12) -> np.ndarray:
    """Gradient of the loss with respect to student features under cosine dissimilarity."""
    return features_grad(lr.grad_student_dissim, np.asarray(feats, dtype=np.float64), eps)
