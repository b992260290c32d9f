"""Hard ranks, sigmoid soft ranks and empirical cumulative functions.

All operations act row-wise on a square dissimilarity matrix: row ``i``
holds the dissimilarities from reference point ``i`` to every point of the
batch, itself included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from pct.errors import InvalidArgument, TieError
from pct.metric import DissimMatrix


@dataclass(frozen=True)
class RankConfig:
    tau: float
    include_diagonal: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidArgument(f"tau must be positive, got {self.tau}")
        if not self.include_diagonal:
            raise InvalidArgument("self terms are always included in the rank sums")


@dataclass(frozen=True)
class RankMatrix:
    values: np.ndarray
    mode: str  # "hard" or "soft"
    tau: float | None = None


@dataclass(frozen=True)
class EmpiricalCdfMatrix:
    values: np.ndarray


def sigmoid(z, out=None):
    """Logistic function via ``0.5 + 0.5 tanh(z / 2)``; cannot overflow for any finite z."""
    out = np.multiply(z, 0.5, out=out)
    np.tanh(out, out=out)
    out *= 0.5
    out += 0.5
    return out


def _values(dm) -> np.ndarray:
    d = dm.values if isinstance(dm, DissimMatrix) else np.asarray(dm, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InvalidArgument(f"expected a square dissimilarity matrix, got shape {d.shape}")
    if d.shape[0] < 2:
        raise InvalidArgument("ranking needs B >= 2")
    return d


def hard_rank_values(d: np.ndarray) -> np.ndarray:
    # "max" rank == number of entries in the row that are <= the entry
    return rankdata(d, method="max", axis=1).astype(np.float64)


def hard_ranks(dm) -> RankMatrix:
    """``r[i, j] = #{k : d[i, k] <= d[i, j]}``; tied entries share the larger rank."""
    return RankMatrix(hard_rank_values(_values(dm)), "hard")


def sigmoid_cube(d: np.ndarray, tau: float, out: np.ndarray | None = None) -> np.ndarray:
    """``S[i, j, k] = sigmoid((d[i, j] - d[i, k]) / tau)``."""
    out = tanh_cube(d, tau, out)
    out *= 0.5
    out += 0.5
    return out


def tanh_cube(d: np.ndarray, tau: float, out: np.ndarray | None = None) -> np.ndarray:
    """``T[i, j, k] = tanh((d[i, j] - d[i, k]) / (2 tau))``, so that ``S = (1 + T) / 2``.

    Working with ``T`` saves two full passes over the cube in the loss kernel.
    """
    b = d.shape[0]
    if out is None:
        out = np.empty((b, b, b))
    a = d * (0.5 / tau)
    np.subtract(a[:, :, None], a[:, None, :], out=out)
    return np.tanh(out, out=out)


def soft_rank_values(d: np.ndarray, tau: float, out: np.ndarray | None = None) -> np.ndarray:
    t = tanh_cube(d, tau, out).sum(axis=2)
    return 0.5 * d.shape[0] + 0.5 * t


def soft_ranks(dm, cfg: RankConfig | float) -> RankMatrix:
    tau = cfg.tau if isinstance(cfg, RankConfig) else float(cfg)
    if not tau > 0:
        raise InvalidArgument(f"tau must be positive, got {tau}")
    return RankMatrix(soft_rank_values(_values(dm), tau), "soft", tau)


def min_row_gap(d: np.ndarray) -> float:
    """Smallest ``|d[i, j] - d[i, k]|`` over all rows and ``j != k``."""
    s = np.sort(d, axis=1)
    return float(np.min(np.diff(s, axis=1)))


def soft_rank_limit_check(dm, tau_small: float) -> float:
    """Largest gap between soft ranks and ``hard ranks - 0.5``.

    The offset is the self term: it contributes ``sigmoid(0) = 0.5`` to a soft
    rank but a full count of one to the hard rank.
    """
    d = _values(dm)
    if min_row_gap(d) == 0.0:
        raise TieError("dissimilarity rows contain ties; the step limit is not defined")
    soft = soft_rank_values(d, tau_small)
    return float(np.max(np.abs(soft - (hard_rank_values(d) - 0.5))))


def empirical_cdf(dm) -> EmpiricalCdfMatrix:
    d = _values(dm)
    return EmpiricalCdfMatrix(hard_rank_values(d) / d.shape[0])
