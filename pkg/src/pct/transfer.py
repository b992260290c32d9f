"""Training loops: free-point configuration transfer, network feature transfer,
supervised teacher training, linear probing and the stylized two-moon study."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from pct.coherence import cdf_matrix, dc_exact
from pct.datasets import PointSet, SplitPointSet, gen_two_moons, split
from pct.errors import InvalidArgument
from pct.evaluation import accuracy, pearson
from pct.loss import LossConfig, coords_grad, features_grad, loss_and_grad
from pct.metric import COSINE, EUCLIDEAN, pairwise_values
from pct.nn import (
    DenseNet,
    OptimizerSpec,
    SoftmaxHead,
    backward,
    feature_net,
    forward,
    init_head,
    save_checkpoint,
    softmax_xent,
)
from pct.ranking import min_row_gap
from pct.rng import stream


@dataclass(frozen=True)
class TransferConfig:
    batch_size: int = 64
    epochs: int = 800
    optimizer: OptimizerSpec = OptimizerSpec("adam", lr=0.1)
    loss: LossConfig = LossConfig(0.1, 0.1)
    checkpoint_every: int = 0
    seed: int = 0
    init_scale: float = 10.0  # student configuration std; configuration transfer only

    def __post_init__(self):
        if self.batch_size < 2:
            raise InvalidArgument("batch_size must be >= 2")
        if self.epochs < 1:
            raise InvalidArgument("epochs must be >= 1")
        if self.checkpoint_every < 0:
            raise InvalidArgument("checkpoint_every must be >= 0")


@dataclass
class TransferTrace:
    losses: list[float] = field(default_factory=list)
    checkpoints: dict[int, object] = field(default_factory=dict)
    phi: dict[int, float] = field(default_factory=dict)
    final_phi: float | None = None
    initial: np.ndarray | None = None
    teacher_ties: bool = False
    coincident_steps: int = 0

    def rows(self):
        """``(epoch, loss, phi or None)`` for every epoch."""
        return [(e + 1, loss, self.phi.get(e + 1)) for e, loss in enumerate(self.losses)]


def _is_checkpoint(epoch: int, cfg: TransferConfig) -> bool:
    return cfg.checkpoint_every > 0 and epoch % cfg.checkpoint_every == 0


def transfer_configuration(teacher_ps: PointSet, student_dim: int, cfg: TransferConfig):
    """Optimize free student coordinates so their Euclidean distance rankings
    match the teacher's. Returns ``(student PointSet, trace)``."""
    teacher = teacher_ps.points
    n, b = teacher_ps.n, cfg.batch_size
    if b > n:
        raise InvalidArgument(f"batch size {b} exceeds the {n} available points")
    trace = TransferTrace()
    trace.teacher_ties = min_row_gap(pairwise_values(teacher, EUCLIDEAN)) == 0.0
    student = cfg.init_scale * stream(cfg.seed, "student_init").standard_normal((n, student_dim))
    trace.initial = student.copy()
    shuffle = stream(cfg.seed, "shuffle")
    opt = cfg.optimizer.build()
    tau_t, tau_s = cfg.loss.tau_teacher, cfg.loss.tau_student
    f_teacher = cdf_matrix(teacher, EUCLIDEAN)
    full_grad = np.zeros_like(student)
    for epoch in range(1, cfg.epochs + 1):
        perm = shuffle.permutation(n)
        total = 0.0
        steps = n // b
        for s in range(steps):
            idx = perm[s * b : (s + 1) * b]
            pts = student[idx]
            ds = pairwise_values(pts, EUCLIDEAN)
            val, gd, _, _ = loss_and_grad(pairwise_values(teacher[idx], EUCLIDEAN), ds, tau_t, tau_s)
            gp, coincident = coords_grad(gd, ds, pts)
            trace.coincident_steps += coincident
            full_grad[:] = 0.0
            full_grad[idx] = cfg.loss.weight * gp
            opt.step([student], [full_grad])
            total += cfg.loss.weight * val
        trace.losses.append(total / steps)
        if _is_checkpoint(epoch, cfg):
            trace.checkpoints[epoch] = student.copy()
            trace.phi[epoch] = dc_exact(f_teacher, cdf_matrix(student, EUCLIDEAN)).global_phi
    trace.final_phi = trace.phi.get(cfg.epochs)
    if trace.final_phi is None:
        trace.final_phi = dc_exact(f_teacher, cdf_matrix(student, EUCLIDEAN)).global_phi
    name = f"{teacher_ps.name}_student" if teacher_ps.name else "student"
    return PointSet(student, teacher_ps.labels, cfg.seed, name), trace


def features_of(net: DenseNet, x) -> np.ndarray:
    return forward(net, x)[0]


def transfer_features(teacher_net: DenseNet, student_net: DenseNet, transfer_ps: PointSet,
                      cfg: TransferConfig, checkpoint_dir=None) -> TransferTrace:
    """Train ``student_net`` in place on cosine rankings of the frozen teacher's features.

    Labels of ``transfer_ps`` are never read. With ``checkpoint_dir`` set,
    snapshots are also written as ``student.ckpt.<epoch>``.
    """
    x = transfer_ps.points
    n, b = transfer_ps.n, cfg.batch_size
    if b > n:
        raise InvalidArgument(f"batch size {b} exceeds the {n} available points")
    teacher = features_of(teacher_net, x)
    f_teacher = cdf_matrix(teacher, COSINE)
    trace = TransferTrace()
    shuffle = stream(cfg.seed, "shuffle")
    opt = cfg.optimizer.build()
    tau_t, tau_s, w = cfg.loss.tau_teacher, cfg.loss.tau_student, cfg.loss.weight
    for epoch in range(1, cfg.epochs + 1):
        perm = shuffle.permutation(n)
        total = 0.0
        steps = n // b
        for s in range(steps):
            idx = perm[s * b : (s + 1) * b]
            feats, tape = forward(student_net, x[idx])
            val, gd, _, _ = loss_and_grad(
                pairwise_values(teacher[idx], COSINE), pairwise_values(feats, COSINE), tau_t, tau_s
            )
            grads, _ = backward(student_net, tape, w * features_grad(gd, feats))
            opt.step(student_net.params(), grads)
            total += w * val
        trace.losses.append(total / steps)
        if _is_checkpoint(epoch, cfg):
            snap = student_net.copy()
            trace.checkpoints[epoch] = snap
            trace.phi[epoch] = dc_exact(f_teacher, cdf_matrix(features_of(snap, x), COSINE)).global_phi
            if checkpoint_dir is not None:
                save_checkpoint(snap, Path(checkpoint_dir) / f"student.ckpt.{epoch}", step=epoch)
    trace.final_phi = trace.phi.get(cfg.epochs)
    if trace.final_phi is None:
        trace.final_phi = dc_exact(f_teacher, cdf_matrix(features_of(student_net, x), COSINE)).global_phi
    return trace


@dataclass(frozen=True)
class SupervisedConfig:
    epochs: int = 20
    batch_size: int = 32
    optimizer: OptimizerSpec = OptimizerSpec("adam", lr=1e-3)
    seed: int = 0


def _batches(n: int, batch_size: int, rng):
    perm = rng.permutation(n)
    return [perm[s : s + batch_size] for s in range(0, n, batch_size)]


def train_supervised(net: DenseNet, head: SoftmaxHead, ps: PointSet, cfg: SupervisedConfig) -> list[float]:
    """Cross-entropy training of extractor and head together, in place."""
    if ps.labels is None:
        raise InvalidArgument("supervised training needs labels")
    rng = stream(cfg.seed, "supervised_shuffle")
    opt = cfg.optimizer.build()
    losses = []
    for _ in range(cfg.epochs):
        total = 0.0
        batches = _batches(ps.n, cfg.batch_size, rng)
        for idx in batches:
            feats, tape = forward(net, ps.points[idx])
            loss, head_grads, g_feats = softmax_xent(head, feats, ps.labels[idx])
            net_grads, _ = backward(net, tape, g_feats)
            opt.step(net.params() + head.params(), net_grads + head_grads)
            total += loss
        losses.append(total / len(batches))
    return losses


def train_head(head: SoftmaxHead, feats: np.ndarray, labels: np.ndarray, cfg: SupervisedConfig) -> None:
    rng = stream(cfg.seed, "probe_shuffle")
    opt = cfg.optimizer.build()
    for _ in range(cfg.epochs):
        for idx in _batches(len(labels), cfg.batch_size, rng):
            _, grads, _ = softmax_xent(head, feats[idx], labels[idx])
            opt.step(head.params(), grads)


def train_probe(frozen_net: DenseNet, head: SoftmaxHead, labeled: SplitPointSet, cfg: SupervisedConfig) -> float:
    """Fit ``head`` on frozen training features; return test accuracy."""
    if labeled.train.labels is None or labeled.test.labels is None:
        raise InvalidArgument("probe training needs labels on both splits")
    train_head(head, features_of(frozen_net, labeled.train.points), labeled.train.labels, cfg)
    pred = head.predict(features_of(frozen_net, labeled.test.points))
    return accuracy(pred, labeled.test.labels)


@dataclass(frozen=True)
class StylizedConfig:
    n: int = 800
    noise: float = 0.1
    train_fraction: float = 0.5
    hidden: int = 20
    features: int = 20
    student_hidden: int | None = None
    teacher: SupervisedConfig = SupervisedConfig(epochs=200, batch_size=32)
    probe: SupervisedConfig = SupervisedConfig(epochs=20, batch_size=32)
    transfer: TransferConfig = TransferConfig(
        batch_size=64, epochs=40, optimizer=OptimizerSpec("adam", lr=1e-3),
        loss=LossConfig(0.1, 0.3), checkpoint_every=4,
    )


@dataclass
class StylizedResult:
    epochs: list[int]
    phi: list[float]
    accuracy: list[float]
    pearson_r: float
    teacher_train_accuracy: float
    teacher_test_accuracy: float
    trace: TransferTrace
    data: SplitPointSet
    teacher_net: DenseNet
    student_net: DenseNet


def train_teacher(data: SplitPointSet, cfg: StylizedConfig, seed: int):
    net = feature_net(cfg.hidden, cfg.features, data.train.dim, seed=int(stream(seed, "teacher_seed").integers(2**63)))
    head = init_head(cfg.features, 2, seed=int(stream(seed, "teacher_head_seed").integers(2**63)))
    train_supervised(net, head, data.train, replace(cfg.teacher, seed=seed))
    return net, head


def stylized_study(seed: int, cfg: StylizedConfig = StylizedConfig(), checkpoint_dir=None) -> StylizedResult:
    """Teacher training, unlabeled feature transfer with periodic checkpoints,
    then a fresh linear probe and the exact training-set coherence per checkpoint."""
    data = split(gen_two_moons(cfg.n, cfg.noise, seed), cfg.train_fraction, seed)
    t_net, t_head = train_teacher(data, cfg, seed)
    tr_acc = accuracy(t_head.predict(features_of(t_net, data.train.points)), data.train.labels)
    te_acc = accuracy(t_head.predict(features_of(t_net, data.test.points)), data.test.labels)

    width = cfg.student_hidden or cfg.hidden
    student = feature_net(width, cfg.features, data.train.dim, seed=int(stream(seed, "student_seed").integers(2**63)))
    trace = transfer_features(t_net, student, data.train, replace(cfg.transfer, seed=seed), checkpoint_dir)

    epochs = sorted(trace.checkpoints)
    accs = []
    for e in epochs:
        head = init_head(cfg.features, 2, seed=int(stream(seed, "probe_head", e).integers(2**63)))
        accs.append(train_probe(trace.checkpoints[e], head, data, replace(cfg.probe, seed=seed)))
    phis = [trace.phi[e] for e in epochs]
    r = pearson(phis, accs) if len(epochs) >= 2 else float("nan")
    return StylizedResult(epochs, phis, accs, r, tr_acc, te_acc, trace, data, t_net, student)
