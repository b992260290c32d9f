"""The runnable experiments behind ``pct run``.

Each experiment takes a validated :class:`~pct.config.RunConfig` and an
output directory, writes its side artifacts (traces, checkpoints, SVG
snapshots) and returns the rows of ``results.csv``. Nothing here reads the
clock, so identical configs give identical tables.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from pct.coherence import (
    cdf_matrix,
    dc_exact,
    is_absolutely_coherent,
    probe_order_preservation,
    probe_rank_preservation,
    rate_fit,
)
from pct.datasets import PointSet, save_pointset
from pct.evaluation import ablation_shape, batch_ablation, mean_row_spearman, retrieve_eval, spearman
from pct.metric import COSINE, EUCLIDEAN, pairwise_values
from pct.ranking import empirical_cdf
from pct.reporting import ResultRow, emit_svg, write_trace
from pct.rng import stream
from pct.transfer import features_of, stylized_study, transfer_configuration


def swirl(x: np.ndarray) -> np.ndarray:
    """Rotate each (centered) point by an angle equal to its radius."""
    r = np.linalg.norm(x, axis=1)
    c, s = np.cos(r), np.sin(r)
    return np.column_stack([c * x[:, 0] - s * x[:, 1], s * x[:, 0] + c * x[:, 1]])


def sine_warp(x: np.ndarray) -> np.ndarray:
    return np.column_stack([x[:, 0] + 0.5 * np.sin(2 * x[:, 1]), x[:, 1] + 0.5 * np.sin(2 * x[:, 0])])


def cube_tanh(x: np.ndarray) -> np.ndarray:
    return np.column_stack([x[:, 0] ** 3, np.tanh(x[:, 1])])


DISTORTIONS = {"swirl": swirl, "sine_warp": sine_warp, "cube_tanh": cube_tanh}

# strictly increasing maps of nonnegative dissimilarities
MONOTONE_TRANSFORMS = (
    np.exp,
    np.sqrt,
    np.log1p,
    lambda d: d**3,
    lambda d: 3.0 * d + 7.0,
    lambda d: d / (1.0 + d),
    np.arctan,
)


def _row(cfg, metric, value, stderr=None, **meta):
    return ResultRow(cfg.experiment, metric, float(value), stderr, {k: str(v) for k, v in meta.items()})


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- toy runs

def run_toy(cfg, out: Path, jobs: int = 1) -> list[ResultRow]:
    teacher = cfg.dataset.build(cfg.seed)
    tcfg = replace(cfg.transfer, seed=cfg.seed)
    student, trace = transfer_configuration(teacher, cfg.options.student_dim, tcfg)
    write_trace(trace.rows(), out / "trace.csv")
    save_pointset(teacher, out / "teacher.pointset")
    save_pointset(student, out / "student.pointset")
    snaps = {0: trace.initial, **trace.checkpoints}
    for epoch, pts in snaps.items():
        snap = PointSet(pts, teacher.labels, cfg.seed, student.name)
        if epoch > 0:
            save_pointset(snap, out / f"student.ckpt.{epoch}")
        if cfg.options.snapshots and pts.shape[1] <= 2:
            emit_svg(teacher, snap, epoch, out / f"snapshot_{epoch}.svg")
    rep = dc_exact(cdf_matrix(teacher.points, EUCLIDEAN), cdf_matrix(student.points, EUCLIDEAN))
    rows = [
        _row(cfg, "initial_loss", trace.losses[0]),
        _row(cfg, "final_loss", trace.losses[-1]),
    ]
    rows += [_row(cfg, "phi_at_epoch", trace.phi[e], epoch=e) for e in sorted(trace.phi)]
    rows += [
        _row(cfg, "global_phi", rep.global_phi),
        _row(cfg, "dc", rep.dc),
        _row(cfg, "mean_row_spearman", mean_row_spearman(teacher.points, student.points)),
        _row(cfg, "teacher_ties", int(trace.teacher_ties)),
        _row(cfg, "coincident_steps", trace.coincident_steps),
    ]
    return rows


def _ablate_batch_one(args):
    cfg, b, out = args
    teacher = cfg.dataset.build(cfg.seed)
    tcfg = replace(cfg.transfer, batch_size=b, seed=cfg.seed)
    student, trace = transfer_configuration(teacher, cfg.options.student_dim, tcfg)
    sub = out / f"B{b}"
    sub.mkdir(parents=True, exist_ok=True)
    write_trace(trace.rows(), sub / "trace.csv")
    save_pointset(student, sub / "student.pointset")
    if student.dim <= 2:
        emit_svg(teacher, student, tcfg.epochs, sub / f"snapshot_{tcfg.epochs}.svg")
    phi = trace.final_phi
    return [
        _row(cfg, "global_phi", phi, batch_size=b),
        _row(cfg, "mean_row_spearman", mean_row_spearman(teacher.points, student.points), batch_size=b),
        _row(cfg, "final_loss", trace.losses[-1], batch_size=b),
        _row(cfg, "reached_threshold", int(phi >= cfg.options.threshold), batch_size=b,
             threshold=cfg.options.threshold),
    ]


def run_ablate_batch(cfg, out: Path, jobs: int = 1) -> list[ResultRow]:
    """Configuration transfer repeated per batch size (same seed, same data)."""
    parts = _map_jobs(_ablate_batch_one, [(cfg, b, out) for b in cfg.options.batch_sizes], jobs)
    return [r for part in parts for r in part]


# ---------------------------------------------------------- network studies

def run_stylized(cfg, out: Path, jobs: int = 1) -> list[ResultRow]:
    ckpt = out / "checkpoints"
    ckpt.mkdir(parents=True, exist_ok=True)
    res = stylized_study(cfg.seed, cfg.stylized_config(), checkpoint_dir=ckpt)
    write_trace(res.trace.rows(), out / "trace.csv")
    rows = [
        _row(cfg, "teacher_train_accuracy", res.teacher_train_accuracy),
        _row(cfg, "teacher_test_accuracy", res.teacher_test_accuracy),
        _row(cfg, "initial_loss", res.trace.losses[0]),
        _row(cfg, "final_loss", res.trace.losses[-1]),
    ]
    for e, phi, acc in zip(res.epochs, res.phi, res.accuracy):
        rows.append(_row(cfg, "phi_at_epoch", phi, epoch=e))
        rows.append(_row(cfg, "probe_accuracy", acc, epoch=e))
    rows.append(_row(cfg, "pearson_r", res.pearson_r))
    rows.append(_row(cfg, "spearman_r", spearman(res.phi, res.accuracy)))
    return rows


def _ablate_width_one(args):
    cfg, width = args
    opts = replace(cfg.options.stylized, student_hidden=width)
    res = stylized_study(cfg.seed, cfg.stylized_config(opts))
    last = res.epochs[-1]
    return [
        _row(cfg, "global_phi", res.phi[-1], width=width, epoch=last),
        _row(cfg, "probe_accuracy", res.accuracy[-1], width=width, epoch=last),
    ]


def run_ablate_width(cfg, out: Path, jobs: int = 1) -> list[ResultRow]:
    """Stylized pipeline with a narrower student hidden layer per run."""
    parts = _map_jobs(_ablate_width_one, [(cfg, w) for w in cfg.options.widths], jobs)
    return [r for part in parts for r in part]


def run_retrieve(cfg, out: Path, jobs: int = 1) -> list[ResultRow]:
    """Train split as database, test split as queries, on raw inputs and on
    teacher and transferred-student features."""
    res = stylized_study(cfg.seed, cfg.stylized_config(cfg.options.stylized))
    tr, te = res.data.train, res.data.test
    k = cfg.options.k
    models = {
        "input": (tr.points, te.points, EUCLIDEAN),
        "teacher": (features_of(res.teacher_net, tr.points), features_of(res.teacher_net, te.points), COSINE),
        "student": (features_of(res.student_net, tr.points), features_of(res.student_net, te.points), COSINE),
    }
    rows = []
    for name, (db, q, metric) in models.items():
        r = retrieve_eval(db, tr.labels, q, te.labels, metric, k)
        rows.append(_row(cfg, "map", r.map, model=name))
        rows.append(_row(cfg, "topk_precision", r.topk_precision, model=name, k=k))
        rows.append(_row(cfg, "missing_class_queries", int(r.missing_class.sum()), model=name))
    rows.append(_row(cfg, "global_phi", res.phi[-1], model="student"))
    return rows


# ----------------------------------------------------- estimator and probes

def run_rate_check(cfg, out: Path, jobs: int = 1) -> list[ResultRow]:
    """Mini-batch estimator against the exact value on a fixed distorted pair."""
    teacher = cfg.dataset.build(cfg.seed).points
    teacher = teacher - teacher.mean(axis=0)
    student = DISTORTIONS[cfg.options.distortion](teacher)
    opts = cfg.options
    table = batch_ablation(teacher, student, (EUCLIDEAN, EUCLIDEAN), opts.batch_sizes, opts.reps, cfg.seed)
    rows = []
    for r in table[:-1]:
        rows.append(_row(cfg, "pc_estimate", r.pc, r.stderr, batch_size=r.batch_size, reps=opts.reps))
        rows.append(_row(cfg, "mean_abs_error", r.mean_abs_error, batch_size=r.batch_size, reps=opts.reps))
    monotone, above = ablation_shape(table)
    rows += [
        _row(cfg, "pc_exact", table[-1].pc),
        _row(cfg, "rate_slope", rate_fit([(r.batch_size, r.mean_abs_error) for r in table[:-1]])),
        _row(cfg, "monotone_within_2se", int(monotone)),
        _row(cfg, "above_limit_within_2se", int(above)),
    ]
    return rows


def _freq(result) -> float:
    f = result.conditional_frequency
    return float("nan") if f is None else f


def run_probe_theorems(cfg, out: Path, jobs: int = 1) -> list[ResultRow]:
    """Monotone transforms of the teacher dissimilarities must be absolutely
    coherent (DC = 0, both probes silent); noisy students are reported."""
    o = cfg.options
    e1, e2 = o.eps_rank
    max_dc, coherent, max_rank, max_order = 0.0, 0, 0.0, 0.0
    for s in range(o.n_sets):
        x = stream(cfg.seed, "probe_set", s).standard_normal((o.points, o.dims))
        d1 = pairwise_values(x, EUCLIDEAN)
        d2 = MONOTONE_TRANSFORMS[s % len(MONOTONE_TRANSFORMS)](d1)
        f1, f2 = empirical_cdf(d1), empirical_cdf(d2)
        max_dc = max(max_dc, dc_exact(f1, f2).dc)
        coherent += is_absolutely_coherent(d1, d2)
        max_rank = max(max_rank, _freq(probe_rank_preservation(f1, f2, e1, e2)))
        max_order = max(max_order, _freq(probe_order_preservation(f1, f2, o.eps_order)))
    rows = [
        _row(cfg, "monotone_max_dc", max_dc, sets=o.n_sets),
        _row(cfg, "monotone_coherent_sets", coherent, sets=o.n_sets),
        _row(cfg, "probe_rank_frequency", max_rank, set="monotone", eps1=e1, eps2=e2),
        _row(cfg, "probe_order_frequency", max_order, set="monotone", eps=o.eps_order),
    ]
    x = stream(cfg.seed, "probe_noisy").standard_normal((o.points, o.dims))
    f1 = cdf_matrix(x, EUCLIDEAN)
    for sigma in o.noise_levels:
        y = x + sigma * stream(cfg.seed, "probe_noise", repr(sigma)).standard_normal(x.shape)
        f2 = cdf_matrix(y, EUCLIDEAN)
        rows.append(_row(cfg, "global_phi", dc_exact(f1, f2).global_phi, noise=sigma))
        rows.append(_row(cfg, "probe_rank_frequency", _freq(probe_rank_preservation(f1, f2, e1, e2)),
                         set="noisy", noise=sigma, eps1=e1, eps2=e2))
        rows.append(_row(cfg, "probe_order_frequency", _freq(probe_order_preservation(f1, f2, o.eps_order)),
                         set="noisy", noise=sigma, eps=o.eps_order))
    return rows


RUNNERS = {
    "toy2d": run_toy,
    "toy3d": run_toy,
    "stylized": run_stylized,
    "ablate_batch": run_ablate_batch,
    "ablate_width": run_ablate_width,
    "rate_check": run_rate_check,
    "probe_theorems": run_probe_theorems,
    "retrieve": run_retrieve,
}


def run_experiment(cfg, out, jobs: int = 1) -> list[ResultRow]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.experiment](cfg, out, jobs)
