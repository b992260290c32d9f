"""Synthetic point sets (two moons, Gaussian clusters), splits and text I/O."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pct.errors import InvalidArgument, ParseError
from pct.rng import stream


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray
    labels: np.ndarray | None = None
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidArgument(f"points must be a non-empty N x D matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("points contain non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (pts.shape[0],):
                raise InvalidArgument(f"labels must have length {pts.shape[0]}, got shape {lab.shape}")
            if lab.size and (not np.issubdtype(lab.dtype, np.integer) and not np.all(lab == np.round(lab))):
                raise InvalidArgument("labels must be integers")
            lab = lab.astype(np.int64)
            if np.any(lab < 0):
                raise InvalidArgument("labels must be nonnegative")
            object.__setattr__(self, "labels", lab)
        if any(c.isspace() for c in self.name):
            raise InvalidArgument("name must not contain whitespace")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, idx, name: str | None = None) -> "PointSet":
        idx = np.asarray(idx)
        labels = None if self.labels is None else self.labels[idx]
        return PointSet(self.points[idx], labels, self.seed, self.name if name is None else name)


@dataclass(frozen=True)
class SplitPointSet:
    train: PointSet
    test: PointSet
    split_seed: int
    train_idx: np.ndarray = field(repr=False, default=None)
    test_idx: np.ndarray = field(repr=False, default=None)


def gen_two_moons(n: int, noise: float, seed: int) -> PointSet:
    """Two interleaved unit half-circles with isotropic Gaussian noise.

    Class 0 is the upper arc ``(cos t, sin t)``; class 1 is its point
    reflection shifted so it reads ``(1 - cos t, 0.5 - sin t)``, with
    ``t`` evenly spaced on ``[0, pi]``. Points are ordered class 0 first.
    """
    if n < 2:
        raise InvalidArgument(f"n must be >= 2, got {n}")
    if noise < 0:
        raise InvalidArgument(f"noise must be nonnegative, got {noise}")
    n0 = n - n // 2
    n1 = n // 2
    t0 = np.linspace(0.0, np.pi, n0)
    t1 = np.linspace(0.0, np.pi, n1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    pts = np.vstack([upper, lower])
    if noise > 0:
        pts = pts + noise * stream(seed, "two_moons").standard_normal(pts.shape)
    labels = np.concatenate([np.zeros(n0, np.int64), np.ones(n1, np.int64)])
    return PointSet(pts, labels, seed, "two_moons")


def gen_gaussian_clusters(
    k: int, n: int, dims: int, spread: float, centers_scale: float, seed: int
) -> PointSet:
    """``n`` points assigned round-robin to ``k`` isotropic Gaussian blobs.

    Centers are uniform in ``[-centers_scale, centers_scale]^dims`` and are
    drawn from the seed's ``centers`` stream, so two calls that differ only
    in ``spread`` share their centers.
    """
    if k < 1 or n < k:
        raise InvalidArgument(f"need k >= 1 and n >= k, got k={k}, n={n}")
    if dims not in (2, 3):
        raise InvalidArgument(f"dims must be 2 or 3, got {dims}")
    if spread < 0 or centers_scale <= 0:
        raise InvalidArgument("spread must be >= 0 and centers_scale > 0")
    centers = stream(seed, "centers").uniform(-centers_scale, centers_scale, size=(k, dims))
    labels = np.arange(n, dtype=np.int64) % k
    pts = centers[labels] + spread * stream(seed, "cluster_noise").standard_normal((n, dims))
    return PointSet(pts, labels, seed, f"clusters{dims}d")


def split(ps: PointSet, train_fraction: float, seed: int) -> SplitPointSet:
    if not 0.0 < train_fraction < 1.0:
        raise InvalidArgument(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = int(round(train_fraction * ps.n))
    if n_train < 1 or n_train > ps.n - 1:
        raise InvalidArgument(f"fraction {train_fraction} of {ps.n} points leaves an empty side")
    perm = stream(seed, "split").permutation(ps.n)
    tr, te = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    return SplitPointSet(
        ps.subset(tr, ps.name + "_train"), ps.subset(te, ps.name + "_test"), seed, tr, te
    )


_HEADER = re.compile(
    r"^# pointset name=(?P<name>\S*) n=(?P<n>\d+) d=(?P<d>\d+) labeled=(?P<lab>[01]) seed=(?P<seed>\d+)$"
)


def save_pointset(ps: PointSet, path) -> None:
    labeled = ps.labels is not None
    lines = [f"# pointset name={ps.name} n={ps.n} d={ps.dim} labeled={int(labeled)} seed={ps.seed & (2**64 - 1)}"]
    for i, row in enumerate(ps.points):
        line = " ".join(f"{v:.17g}" for v in row)
        if labeled:
            line += f"\t{ps.labels[i]}"
        lines.append(line)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_pointset(path) -> PointSet:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise InvalidArgument(f"{path}: empty point set file")
    m = _HEADER.match(lines[0])
    if m is None:
        raise ParseError("malformed pointset header", 1)
    n, d, labeled = int(m["n"]), int(m["d"]), m["lab"] == "1"
    body = lines[1:]
    if n < 1:
        raise InvalidArgument(f"{path}: point set must hold at least one point")
    if len(body) != n:
        raise ParseError(f"header declares n={n} rows, found {len(body)}", len(lines))
    pts = np.empty((n, d))
    labels = np.empty(n, np.int64) if labeled else None
    for i, line in enumerate(body):
        lineno = i + 2
        coords, sep, lab = line.partition("\t")
        if labeled != bool(sep):
            raise ParseError(f"row {i} label presence disagrees with header", lineno)
        toks = coords.split(" ")
        if len(toks) != d:
            raise ParseError(f"row {i} has {len(toks)} coordinates, expected {d}", lineno)
        try:
            pts[i] = [float(t) for t in toks]
            if labeled:
                labels[i] = int(lab)
        except ValueError as exc:
            raise ParseError(f"row {i}: {exc}", lineno) from None
    return PointSet(pts, labels, int(m["seed"]), m["name"])
