"""Result tables, training traces and static SVG snapshots.

``results.csv`` has the columns ``experiment,metric,value,stderr,meta``.
Floats use Python's shortest round-trip ``repr``; ``stderr`` is blank when
not applicable; ``meta`` holds ``key=value`` pairs joined by ``;`` in sorted
key order. Metric names come from :data:`METRICS`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pct.errors import InvalidArgument, ShapeMismatch

METRICS = {
    "global_phi": "exact global coherence 1 - DC on the full point set",
    "dc": "exact difference coefficient",
    "mean_row_spearman": "mean over rows of Spearman(teacher row, student row), diagonal excluded",
    "initial_loss": "mean coherence loss over the first epoch",
    "final_loss": "mean coherence loss over the last epoch",
    "phi_at_epoch": "exact global coherence at a checkpoint (meta: epoch)",
    "probe_accuracy": "linear-probe test accuracy (meta: epoch and/or width)",
    "pearson_r": "Pearson correlation of checkpoint coherence and probe accuracy",
    "spearman_r": "Spearman correlation of checkpoint coherence and probe accuracy",
    "teacher_train_accuracy": "supervised teacher accuracy on the training split",
    "teacher_test_accuracy": "supervised teacher accuracy on the test split",
    "reached_threshold": "1 if the final coherence reached the configured threshold, else 0",
    "pc_estimate": "mean mini-batch coherence estimate, stderr over replications (meta: batch_size, reps)",
    "pc_exact": "exact coherence the estimates converge to",
    "mean_abs_error": "mean |DC_B estimate - DC| over replications (meta: batch_size)",
    "rate_slope": "least-squares log-log slope of mean_abs_error against batch size",
    "monotone_within_2se": "1 if estimates are nonincreasing in B within 2 combined stderr",
    "above_limit_within_2se": "1 if every estimate is >= the exact value minus 2 stderr",
    "monotone_max_dc": "largest exact DC over monotone-transform pairs (expected 0)",
    "monotone_coherent_sets": "number of monotone-transform pairs found absolutely coherent",
    "probe_rank_frequency": "conditional frequency of the rank-preservation probe (meta: set, noise)",
    "probe_order_frequency": "conditional frequency of the order-preservation probe (meta: set, noise)",
    "map": "11-point interpolated mean average precision (meta: model)",
    "topk_precision": "precision among the first k retrieved items (meta: model, k)",
    "missing_class_queries": "queries whose class is absent from the database (meta: model)",
    "teacher_ties": "1 if some teacher row has tied dissimilarities",
    "coincident_steps": "optimizer steps that met coincident student points",
}


def fmt_float(v) -> str:
    """Shortest round-trip text for a float; blank for ``None``."""
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    metric: str
    value: float
    stderr: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.metric not in METRICS:
            raise InvalidArgument(f"metric {self.metric!r} is not in the results vocabulary")
        for k, v in self.meta.items():
            if any(c in f"{k}{v}" for c in ";=,\n\"") or not str(k):
                raise InvalidArgument(f"meta entry {k}={v} contains a reserved character")

    def meta_text(self) -> str:
        return ";".join(f"{k}={self.meta[k]}" for k in sorted(self.meta))


HEADER = ("experiment", "metric", "value", "stderr", "meta")


def results_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow((r.experiment, r.metric, fmt_float(r.value), fmt_float(r.stderr), r.meta_text()))
    return buf.getvalue()


def write_results(rows, path) -> None:
    Path(path).write_text(results_text(rows), encoding="utf-8", newline="")


def _parse_meta(text: str) -> dict:
    if not text:
        return {}
    return dict(part.split("=", 1) for part in text.split(";"))


def read_results(path) -> list[ResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != HEADER:
            raise InvalidArgument(f"{path}: not a results table")
        return [
            ResultRow(e, m, float(v), float(s) if s else None, _parse_meta(meta))
            for e, m, v, s, meta in reader
        ]


def merge_results(paths, tag_runs: bool = True) -> list[ResultRow]:
    """Concatenate result tables in the given order; optionally tag each row
    with ``run=<directory name>``."""
    rows = []
    for p in paths:
        p = Path(p)
        table = p / "results.csv" if p.is_dir() else p
        for r in read_results(table):
            meta = dict(r.meta, run=table.parent.name) if tag_runs else r.meta
            rows.append(ResultRow(r.experiment, r.metric, r.value, r.stderr, meta))
    return rows


def write_trace(trace_rows, path) -> None:
    """``epoch,loss,phi_or_blank`` rows from :meth:`TransferTrace.rows`."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("epoch", "loss", "phi_or_blank"))
    for epoch, loss, phi in trace_rows:
        w.writerow((epoch, fmt_float(loss), fmt_float(phi)))
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


# --------------------------------------------------------------------- SVG

WIDTH, HEIGHT, MARGIN = 800, 400, 24
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def pca2(points) -> np.ndarray:
    """Orthographic projection onto the first two principal axes.

    Axes come from the SVD of the centered data; each axis is signed so that
    its largest-magnitude component is positive, which makes the projection
    deterministic.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.shape[1] <= 2:
        return x.copy()
    c = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(c, full_matrices=True)  # full V: two axes even when N < 2
    axes = vt[:2]
    signs = np.sign(axes[np.arange(2), np.argmax(np.abs(axes), axis=1)])
    axes = axes * signs[:, None]
    return c @ axes.T


def _fit_panel(p: np.ndarray, x0: float) -> np.ndarray:
    """Map points into a square panel starting at ``x0``, preserving aspect ratio
    and flipping y so that up is up."""
    side = HEIGHT - 2 * MARGIN
    lo, hi = p.min(axis=0), p.max(axis=0)
    span = float(np.max(hi - lo))
    mid = (lo + hi) / 2
    scale = side / span if span > 0 else 0.0
    out = np.empty_like(p)
    out[:, 0] = x0 + MARGIN + side / 2 + (p[:, 0] - mid[0]) * scale
    out[:, 1] = MARGIN + side / 2 - (p[:, 1] - mid[1]) * scale
    return out


def _g(v: float) -> str:
    s = f"{v:.6g}"
    return "0" if s == "-0" else s


def svg_text(teacher, student, labels=None, epoch: int | None = None) -> str:
    t = np.asarray(teacher, dtype=np.float64)
    s = np.asarray(student, dtype=np.float64)
    if t.ndim != 2 or s.ndim != 2 or len(t) != len(s):
        raise ShapeMismatch(f"teacher holds {len(t)} points and student {len(s)}")
    if t.shape[1] not in (1, 2, 3) or s.shape[1] not in (1, 2):
        raise InvalidArgument("teacher must be 1-3D and student 1-2D")
    if t.shape[1] == 1:
        t = np.column_stack([t[:, 0], np.zeros(len(t))])
    if s.shape[1] == 1:
        s = np.column_stack([s[:, 0], np.zeros(len(s))])
    tp = _fit_panel(pca2(t), 0.0)
    sp = _fit_panel(s, WIDTH / 2)
    colors = [PALETTE[0]] * len(t) if labels is None else [PALETTE[int(c) % len(PALETTE)] for c in labels]
    title = "teacher | student" + (f" | epoch {epoch}" if epoch is not None else "")
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<line x1="{WIDTH // 2}" y1="0" x2="{WIDTH // 2}" y2="{HEIGHT}" stroke="#000000" stroke-width="1"/>',
        f'<text x="8" y="16" font-family="sans-serif" font-size="12">{title}</text>',
        '<g stroke="#808080" stroke-opacity="0.2" stroke-width="0.5">',
    ]
    for (x1, y1), (x2, y2) in zip(tp, sp):
        out.append(f'<line x1="{_g(x1)}" y1="{_g(y1)}" x2="{_g(x2)}" y2="{_g(y2)}"/>')
    out.append("</g>")
    for panel in (tp, sp):
        out.append("<g>")
        for (x, y), c in zip(panel, colors):
            out.append(f'<circle cx="{_g(x)}" cy="{_g(y)}" r="2" fill="{c}"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(teacher_ps, student_ps, epoch: int | None, path) -> None:
    """Teacher panel left, student panel right, one gray line per point pair."""
    Path(path).write_text(
        svg_text(teacher_ps.points, student_ps.points, teacher_ps.labels, epoch), encoding="utf-8", newline=""
    )
