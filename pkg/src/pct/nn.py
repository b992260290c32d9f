"""Small fully connected networks with hand-written backprop, a softmax head
and SGD/Adam optimizers operating in place on lists of parameter arrays."""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pct.errors import InvalidArgument, ParseError, ShapeMismatch, StaleTapeError
from pct.rng import stream

ACTIVATIONS = ("relu", "identity")


@dataclass
class Layer:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise InvalidArgument(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeMismatch("layer bias must match the weight's output width")


@dataclass
class DenseNet:
    layers: list[Layer]
    seed: int = 0

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise ShapeMismatch("consecutive layer widths do not chain")

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def spec(self) -> str:
        return ",".join(f"{l.weight.shape[0]}x{l.weight.shape[1]}:{l.activation}" for l in self.layers)

    def copy(self) -> "DenseNet":
        return DenseNet([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers], self.seed)


def _uniform_init(rng, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_net(widths, activations, seed: int) -> DenseNet:
    """Weights and biases uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``.

    ``widths = [2, 20, 20]`` with ``activations = ["relu", "identity"]`` is
    the two-layer extractor used in the stylized study.
    """
    if len(widths) != len(activations) + 1:
        raise InvalidArgument("need one activation per layer")
    rng = stream(seed, "init")
    layers = []
    for fi, fo, act in zip(widths, widths[1:], activations):
        w = _uniform_init(rng, fi, (fi, fo))
        b = _uniform_init(rng, fi, (fo,))
        layers.append(Layer(w, b, act))
    return DenseNet(layers, seed)


def feature_net(hidden: int = 20, out: int = 20, in_dim: int = 2, seed: int = 0) -> DenseNet:
    return init_net([in_dim, hidden, out], ["relu", "identity"], seed)


def _fingerprint(params) -> int:
    crc = 0
    for p in params:
        crc = zlib.crc32(np.ascontiguousarray(p).tobytes(), crc)
    return crc


@dataclass
class Tape:
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    fingerprint: int
    net_id: int


def forward(net: DenseNet, batch) -> tuple[np.ndarray, Tape]:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ShapeMismatch(f"batch of shape {x.shape} does not feed a {net.in_dim}-input net")
    inputs, pre = [], []
    for layer in net.layers:
        inputs.append(x)
        z = x @ layer.weight + layer.bias
        pre.append(z)
        x = np.maximum(z, 0.0) if layer.activation == "relu" else z
    return x, Tape(inputs, pre, _fingerprint(net.params()), id(net))


def backward(net: DenseNet, tape: Tape, grad_out) -> tuple[list[np.ndarray], np.ndarray]:
    """Reverse pass. Returns gradients aligned with ``net.params()`` and the
    gradient with respect to the input batch. ReLU'(0) is taken as 0."""
    if tape.net_id != id(net) or tape.fingerprint != _fingerprint(net.params()):
        raise StaleTapeError("tape was recorded for different parameters")
    g = np.asarray(grad_out, dtype=np.float64)
    grads: list[np.ndarray] = []
    for layer, x, z in zip(reversed(net.layers), reversed(tape.inputs), reversed(tape.pre)):
        if layer.activation == "relu":
            g = g * (z > 0.0)
        grads += [g.sum(axis=0), x.T @ g]
        g = g @ layer.weight.T
    grads.reverse()  # now [W0, b0, W1, b1, ...]
    return grads, g


@dataclass
class SoftmaxHead:
    weight: np.ndarray  # (classes, features)
    bias: np.ndarray

    def params(self) -> list[np.ndarray]:
        return [self.weight, self.bias]

    def logits(self, feats: np.ndarray) -> np.ndarray:
        return feats @ self.weight.T + self.bias

    def predict(self, feats: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(feats), axis=1)


def init_head(features: int, classes: int, seed: int) -> SoftmaxHead:
    rng = stream(seed, "head_init")
    return SoftmaxHead(
        _uniform_init(rng, features, (classes, features)), _uniform_init(rng, features, (classes,))
    )


def softmax_xent(head: SoftmaxHead, features, labels):
    """Mean cross-entropy and its gradients.

    Returns ``(loss, [dW, db], dfeatures)``.
    """
    feats = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    c = head.weight.shape[0]
    if labels.shape != (feats.shape[0],) or np.any(labels < 0) or np.any(labels >= c):
        raise InvalidArgument(f"labels must be {feats.shape[0]} ids in [0, {c})")
    z = head.logits(feats)
    z = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    n = feats.shape[0]
    rows = np.arange(n)
    loss = float(np.mean(lse - z[rows, labels]))
    p = np.exp(z - lse[:, None])
    p[rows, labels] -= 1.0
    p /= n
    return loss, [p.T @ feats, p.sum(axis=0)], p @ head.weight


class SGD:
    """SGD with optional (Nesterov) momentum; weight decay is added to the gradient."""

    def __init__(self, lr: float, momentum: float = 0.0, nesterov: bool = False, weight_decay: float = 0.0):
        if nesterov and momentum <= 0:
            raise InvalidArgument("nesterov needs momentum > 0")
        self.lr, self.momentum, self.nesterov, self.weight_decay = lr, momentum, nesterov, weight_decay
        self.buf: list[np.ndarray] | None = None
        self.t = 0

    def step(self, params, grads):
        if self.buf is None and self.momentum:
            self.buf = [None] * len(params)
        for n, (p, g) in enumerate(zip(params, grads)):
            if self.weight_decay:
                g = g + self.weight_decay * p
            if self.momentum:
                b = self.buf[n]
                b = g.copy() if b is None else self.momentum * b + g
                self.buf[n] = b
                g = g + self.momentum * b if self.nesterov else b
            p -= self.lr * g
        self.t += 1
        return params


class Adam:
    """Adam with bias-corrected moments (the common reference update)."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None
        self.t = 0

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        return params


@dataclass(frozen=True)
class OptimizerSpec:
    kind: str = "adam"
    lr: float = 1e-3
    momentum: float = 0.0
    nesterov: bool = False
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("adam", "sgd"):
            raise InvalidArgument(f"unknown optimizer {self.kind!r}")
        if not self.lr > 0:
            raise InvalidArgument("learning rate must be positive")

    def build(self):
        if self.kind == "adam":
            return Adam(self.lr, self.beta1, self.beta2, self.eps)
        return SGD(self.lr, self.momentum, self.nesterov, self.weight_decay)


def opt_step(opt, params, grads):
    return opt.step(params, grads)


_CKPT = re.compile(r"^# densenet layers=(?P<spec>\S+) step=(?P<step>\d+)$")
_LAYER = re.compile(r"^(\d+)x(\d+):(relu|identity)$")


def save_checkpoint(net: DenseNet, path, step: int = 0) -> None:
    lines = [f"# densenet layers={net.spec()} step={step}"]
    for p in net.params():
        for row in np.atleast_2d(p):
            lines.append(" ".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[DenseNet, int]:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    m = _CKPT.match(lines[0]) if lines else None
    if m is None:
        raise ParseError("malformed densenet header", 1)
    shapes = []
    for part in m["spec"].split(","):
        lm = _LAYER.match(part)
        if lm is None:
            raise ParseError(f"bad layer spec {part!r}", 1)
        shapes.append((int(lm[1]), int(lm[2]), lm[3]))
    try:
        vals = np.array([float(t) for line in lines[1:] for t in line.split()])
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    need = sum(fi * fo + fo for fi, fo, _ in shapes)
    if vals.size != need:
        raise ParseError(f"expected {need} parameters, found {vals.size}")
    layers, pos = [], 0
    for fi, fo, act in shapes:
        w = vals[pos : pos + fi * fo].reshape(fi, fo)
        pos += fi * fo
        b = vals[pos : pos + fo].copy()
        pos += fo
        layers.append(Layer(w.copy(), b, act))
    return DenseNet(layers), int(m["step"])
