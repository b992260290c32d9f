import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pct.errors import InvalidArgument, ParseError, ShapeMismatch, StaleTapeError
from pct.nn import (
    SGD,
    Adam,
    Layer,
    DenseNet,
    OptimizerSpec,
    backward,
    feature_net,
    forward,
    init_head,
    init_net,
    load_checkpoint,
    save_checkpoint,
    softmax_xent,
)


def numeric_grad(f, arr, h=1e-6):
    g = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        old = arr[idx]
        arr[idx] = old + h
        up = f()
        arr[idx] = old - h
        down = f()
        arr[idx] = old
        g[idx] = (up - down) / (2 * h)
    return g


def test_init_shapes_and_bounds():
    net = feature_net(hidden=20, out=20, seed=3)
    assert net.spec() == "2x20:relu,20x20:identity"
    assert [p.shape for p in net.params()] == [(2, 20), (20,), (20, 20), (20,)]
    assert np.all(np.abs(net.layers[0].weight) <= 1 / math.sqrt(2))
    assert np.all(np.abs(net.layers[1].weight) <= 1 / math.sqrt(20))


def test_init_deterministic():
    a, b = feature_net(seed=9), feature_net(seed=9)
    assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))
    c = feature_net(seed=10)
    assert not np.array_equal(a.layers[0].weight, c.layers[0].weight)


def test_forward_by_hand():
    net = DenseNet([
        Layer(np.array([[1.0, -1.0]]), np.array([0.0, 0.5]), "relu"),
        Layer(np.array([[2.0], [3.0]]), np.array([1.0]), "identity"),
    ])
    y, _ = forward(net, np.array([[1.0], [-1.0]]))
    # x=1: hidden relu(1, -0.5) = (1, 0) -> 2 + 0 + 1 = 3
    # x=-1: hidden relu(-1, 1.5) = (0, 1.5) -> 4.5 + 1 = 5.5
    np.testing.assert_array_equal(y[:, 0], [3.0, 5.5])


@given(st.integers(1, 5), st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_backward_finite_difference(n, seed):
    rng = np.random.default_rng(seed)
    net = init_net([3, 5, 4, 2], ["relu", "relu", "identity"], seed)
    x = rng.normal(size=(n, 3))
    w = rng.normal(size=(n, 2))  # loss = sum(w * y), upstream gradient w

    def f():
        return float(np.sum(w * forward(net, x)[0]))

    y, tape = forward(net, x)
    grads, gin = backward(net, tape, w)
    for p, g in zip(net.params(), grads):
        np.testing.assert_allclose(g, numeric_grad(f, p), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(gin, numeric_grad(f, x), rtol=1e-6, atol=1e-8)


def test_relu_derivative_at_zero():
    net = DenseNet([Layer(np.array([[1.0]]), np.array([0.0]), "relu")])
    _, tape = forward(net, np.array([[0.0]]))
    grads, gin = backward(net, tape, np.array([[1.0]]))
    assert grads[0][0, 0] == 0.0 and gin[0, 0] == 0.0


def test_stale_tape():
    net = feature_net(seed=1)
    _, tape = forward(net, np.zeros((2, 2)))
    net.layers[0].weight[0, 0] += 1.0
    with pytest.raises(StaleTapeError):
        backward(net, tape, np.zeros((2, 20)))
    other = net.copy()
    _, tape = forward(net, np.zeros((2, 2)))
    with pytest.raises(StaleTapeError):
        backward(other, tape, np.zeros((2, 20)))


def test_forward_shape_check():
    with pytest.raises(ShapeMismatch):
        forward(feature_net(), np.zeros((4, 3)))


def test_softmax_xent_values_and_gradient():
    rng = np.random.default_rng(2)
    head = init_head(4, 3, 0)
    feats = rng.normal(size=(6, 4))
    labels = np.array([0, 1, 2, 2, 1, 0])
    loss, (dw, db), df = softmax_xent(head, feats, labels)

    z = feats @ head.weight.T + head.bias
    oracle = np.mean([math.log(sum(math.exp(v) for v in row)) - row[y] for row, y in zip(z, labels)])
    assert loss == pytest.approx(oracle, rel=1e-12)

    def f():
        return softmax_xent(head, feats, labels)[0]

    np.testing.assert_allclose(dw, numeric_grad(f, head.weight), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(db, numeric_grad(f, head.bias), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(df, numeric_grad(f, feats), rtol=1e-6, atol=1e-9)


def test_softmax_xent_uniform_logits():
    head = init_head(2, 4, 0)
    head.weight[:] = 0.0
    head.bias[:] = 0.0
    loss, _, _ = softmax_xent(head, np.ones((3, 2)), np.array([0, 1, 3]))
    assert loss == pytest.approx(math.log(4))


def test_softmax_xent_rejects_bad_labels():
    with pytest.raises(InvalidArgument):
        softmax_xent(init_head(2, 2, 0), np.ones((2, 2)), np.array([0, 2]))


def adam_reference(p, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    return p


def test_adam_matches_scalar_reference():
    gs = [0.3, -1.2, 0.05, 2.0, -0.7]
    p = np.array([1.5])
    opt = Adam(lr=0.01)
    for g in gs:
        opt.step([p], [np.array([g])])
    assert p[0] == pytest.approx(adam_reference(1.5, gs, 0.01), rel=1e-14)


def test_adam_first_step_is_lr_sized():
    p = np.array([0.0, 0.0])
    Adam(lr=0.1).step([p], [np.array([5.0, -1e-3])])
    np.testing.assert_allclose(p, [-0.1, 0.1], rtol=1e-4)


def sgd_reference(p, grads, lr, mu, nesterov, wd):
    buf = None
    for g in grads:
        g = g + wd * p
        buf = g if buf is None else mu * buf + g
        step = g + mu * buf if nesterov else buf
        p -= lr * step
    return p


@pytest.mark.parametrize("mu, nesterov, wd", [(0.0, False, 0.0), (0.9, False, 0.0), (0.9, True, 0.01)])
def test_sgd_matches_scalar_reference(mu, nesterov, wd):
    gs = [0.3, -1.2, 0.05, 2.0]
    p = np.array([1.5])
    opt = SGD(0.05, mu, nesterov, wd)
    for g in gs:
        opt.step([p], [np.array([g])])
    assert p[0] == pytest.approx(sgd_reference(1.5, gs, 0.05, mu, nesterov, wd), rel=1e-14)


def test_optimizer_spec():
    assert isinstance(OptimizerSpec("adam", 0.1).build(), Adam)
    assert isinstance(OptimizerSpec("sgd", 0.1, momentum=0.9).build(), SGD)
    with pytest.raises(InvalidArgument):
        OptimizerSpec("rmsprop")
    with pytest.raises(InvalidArgument):
        OptimizerSpec("adam", 0.0)
    with pytest.raises(InvalidArgument):
        SGD(0.1, nesterov=True)


def test_training_reduces_loss():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(64, 2))
    labels = (x[:, 0] * x[:, 1] > 0).astype(int)
    net, head = feature_net(16, 8, seed=0), init_head(8, 2, 0)
    opt = Adam(0.01)
    first = None
    for _ in range(300):
        feats, tape = forward(net, x)
        loss, hg, df = softmax_xent(head, feats, labels)
        first = loss if first is None else first
        grads, _ = backward(net, tape, df)
        opt.step(net.params() + head.params(), grads + hg)
    assert loss < 0.5 * first


def test_checkpoint_roundtrip(tmp_path):
    net = feature_net(7, 5, seed=4)
    path = tmp_path / "net.ckpt"
    save_checkpoint(net, path, step=12)
    back, step = load_checkpoint(path)
    assert step == 12 and back.spec() == net.spec()
    for p, q in zip(net.params(), back.params()):
        assert p.tobytes() == q.tobytes()
    assert path.read_text().startswith("# densenet layers=2x7:relu,7x5:identity step=12\n")


def test_checkpoint_parse_errors(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_text("not a header\n")
    with pytest.raises(ParseError):
        load_checkpoint(path)
    path.write_text("# densenet layers=1x1:identity step=0\n1.0\n")
    with pytest.raises(ParseError):
        load_checkpoint(path)
