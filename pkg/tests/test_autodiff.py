import math

import numpy as np
import pytest
from conftest import check_grads
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rnas.autodiff import (
    SGD, Adam, Linear, Module, Parameter, ShapeError, Tensor, backward, clip_grad_norm, constant, cosine_lr, grad,
    no_grad,
)
from rnas.autodiff import functional as F

finite = st.floats(-5, 5, allow_nan=False, width=64)


# forward examples


def test_relu_definition():
    assert F.relu(Tensor([-1.0, 0.0, 2.0])).data.tolist() == [0.0, 0.0, 2.0]


def test_softmax_symmetric():
    np.testing.assert_array_equal(F.softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])


def test_conv_center_of_ones():
    out = F.conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))), padding=1)
    assert out.shape == (1, 1, 3, 3)
    assert out.data[0, 0, 1, 1] == 9.0
    assert out.data[0, 0, 0, 0] == 4.0


def naive_conv(x, w, b, stride, pad):
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, o, oh, ow))
    for i in range(n):
        for k in range(o):
            for r in range(oh):
                for s in range(ow):
                    patch = xp[i, :, r * stride : r * stride + kh, s * stride : s * stride + kw]
                    out[i, k, r, s] = (patch * w[k]).sum() + (b[k] if b is not None else 0.0)
    return out


@pytest.mark.parametrize("stride,pad,k", [(1, 1, 3), (2, 1, 3), (1, 2, 5), (2, 0, 1)])
def test_conv_matches_loop_oracle(rng, stride, pad, k):
    x = rng.standard_normal((2, 3, 7, 6))
    w = rng.standard_normal((4, 3, k, k))
    b = rng.standard_normal(4)
    out = F.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, padding=pad)
    np.testing.assert_allclose(out.data, naive_conv(x, w, b, stride, pad), rtol=1e-12, atol=1e-12)


def naive_pool(x, k, stride, pad, kind):
    n, c, h, w = x.shape
    fill = -np.inf if kind == "max" else 0.0
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=fill)
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    out = np.zeros((n, c, oh, ow))
    for r in range(oh):
        for s in range(ow):
            win = xp[:, :, r * stride : r * stride + k, s * stride : s * stride + k]
            out[:, :, r, s] = win.max(axis=(2, 3)) if kind == "max" else win.mean(axis=(2, 3))
    return out


@pytest.mark.parametrize("stride", [1, 2])
@pytest.mark.parametrize("kind", ["max", "avg"])
def test_pooling_matches_loop_oracle(rng, stride, kind):
    x = rng.standard_normal((2, 3, 7, 8))
    fn = F.max_pool2d if kind == "max" else F.avg_pool2d
    out = fn(Tensor(x), 3, stride, 1)
    np.testing.assert_allclose(out.data, naive_pool(x, 3, stride, 1, kind), rtol=1e-12, atol=1e-12)


def test_batch_norm_statistics(rng):
    x = rng.standard_normal((8, 3, 4, 4)) * 3 + 2
    y = F.batch_norm(Tensor(x)).data
    np.testing.assert_allclose(y.mean(axis=(0, 2, 3)), 0, atol=1e-12)
    np.testing.assert_allclose(y.var(axis=(0, 2, 3)), 1, atol=1e-4)


# backward examples


def test_sum_of_squares_gradient():
    x = Tensor([1.0, 2.0], requires_grad=True)
    (x * x).sum().backward()
    np.testing.assert_array_equal(x.grad, [2.0, 4.0])


def test_mean_gradient():
    x = Tensor(np.arange(4.0), requires_grad=True)
    x.mean().backward()
    np.testing.assert_array_equal(x.grad, [0.25] * 4)


def test_reused_tensor_accumulates():
    x = Tensor([3.0], requires_grad=True)
    (x * x + x * 2.0 + x).sum().backward()
    np.testing.assert_allclose(x.grad, [2 * 3.0 + 3.0])


def test_backward_accumulates_across_calls():
    x = Tensor([1.0, -1.0], requires_grad=True)
    (x * 3.0).sum().backward()
    (x * 3.0).sum().backward()
    np.testing.assert_array_equal(x.grad, [6.0, 6.0])


def test_constant_never_gets_grad():
    c = constant([1.0, 2.0])
    x = Tensor([1.0, 1.0], requires_grad=True)
    (c * x).sum().backward()
    assert c.grad is None
    assert not c.requires_grad


def test_grad_function_leaves_grad_fields_alone():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = Tensor([3.0], requires_grad=True)
    (gx,) = grad((x * y).sum(), [x])
    np.testing.assert_array_equal(gx, [3.0, 3.0])
    assert x.grad is None and y.grad is None


def test_grad_of_unused_input_is_zero():
    x = Tensor([1.0], requires_grad=True)
    z = Tensor([2.0], requires_grad=True)
    gx, gz = grad((x * 2.0).sum(), [x, z])
    assert gx.tolist() == [2.0] and gz.tolist() == [0.0]


def test_backward_rejects_non_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ShapeError):
        (x * 2.0).backward()


def test_backward_visits_in_reverse_creation_order():
    order = []
    x = Tensor([1.0], requires_grad=True)
    a = x * 2.0
    b = a + 1.0
    c = b * a
    for t, name in ((a, "a"), (b, "b"), (c, "c")):
        inner = t._backward

        def spy(g, needs, inner=inner, name=name):
            order.append(name)
            return inner(g, needs)

        t._backward = spy
    backward(c.sum())
    assert order == ["c", "b", "a"]


def test_shape_mismatch_reports_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4,\)"):
        Tensor(np.zeros((2, 3))) + Tensor(np.zeros(4))
    with pytest.raises(ShapeError):
        F.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))


def test_no_grad_builds_no_graph():
    x = Tensor([1.0], requires_grad=True)
    with no_grad():
        y = x * 2.0
    assert not y.requires_grad and y._parents == ()


def test_determinism_of_backward(rng):
    x = rng.standard_normal((3, 4))
    w = rng.standard_normal((5, 4))

    def run():
        xt, wt = Tensor(x, requires_grad=True), Tensor(w, requires_grad=True)
        F.log_softmax(F.linear(xt, wt)).sum().backward()
        return xt.grad.tobytes() + wt.grad.tobytes()

    assert run() == run()


def test_float32_default_and_float64_preserved():
    assert Tensor([1.0]).dtype == np.float32
    assert Tensor(np.array([1.0])).dtype == np.float64


# cross-entropy


def test_cross_entropy_uniform_two_classes():
    assert math.isclose(F.cross_entropy(Tensor(np.zeros((3, 2))), [0, 1, 0]).item(), math.log(2), rel_tol=1e-6)


def test_cross_entropy_vanishes_with_margin():
    losses = [F.cross_entropy(Tensor(np.array([[m, 0.0]])), [0]).item() for m in (1.0, 10.0, 50.0)]
    assert losses[0] > losses[1] > losses[2] >= 0 and losses[2] < 1e-20


def test_cross_entropy_scalar_oracle(rng):
    logits = rng.standard_normal((6, 5))
    labels = rng.integers(0, 5, 6)
    expect = 0.0
    for row, y in zip(logits, labels):
        expect += -row[y] + math.log(sum(math.exp(v) for v in row))
    assert math.isclose(F.cross_entropy(Tensor(logits), labels).item(), expect / 6, rel_tol=1e-12)


def test_cross_entropy_rejects_bad_labels():
    with pytest.raises(ValueError):
        F.cross_entropy(Tensor(np.zeros((2, 3))), [0, 3])
    with pytest.raises(ShapeError):
        F.cross_entropy(Tensor(np.zeros((2, 3))), [0])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 6)), elements=finite))
def test_softmax_rows_are_distributions(x):
    p = F.softmax(Tensor(x)).data
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, rtol=1e-12)
    np.testing.assert_allclose(F.log_softmax(Tensor(x)).data, np.log(p), atol=1e-10)


# finite differences, float64


def test_elementwise_ops_fd(rng):
    a = rng.standard_normal((3, 4))
    b = rng.uniform(0.5, 2.0, (1, 4))
    check_grads(lambda x, y: (x * y + x / y - y).sum(), [a, b])
    check_grads(lambda x: (F.exp(x) + F.power(x, 2) * 0.5).mean(), [a])
    check_grads(lambda y: (F.log(y) + F.sqrt(y)).sum(), [b])
    check_grads(lambda x: (F.relu(x) * x).sum(), [a])
    check_grads(lambda x: (F.clamp(x, -0.5, 0.7) * x).sum(), [a])


def test_shape_ops_fd(rng):
    a = rng.standard_normal((2, 3, 4))
    b = rng.standard_normal((2, 2, 4))
    check_grads(lambda x: (F.transpose(x, (2, 0, 1)) * np.arange(24.0).reshape(4, 2, 3)).sum(), [a])
    check_grads(lambda x: (F.reshape(x, (6, 4)) ** 2).sum(), [a])
    check_grads(lambda x, y: (F.concat([x, y], axis=1) ** 3).sum(), [a, b])
    check_grads(lambda x: (x[:, 1:, ::2] ** 2).sum(), [a])
    check_grads(lambda x: F.sum(x * x, axis=(0, 2), keepdims=True).sum(), [a])


def test_matmul_linear_softmax_fd(rng):
    x = rng.standard_normal((3, 4))
    w = rng.standard_normal((5, 4))
    b = rng.standard_normal(5)
    labels = rng.integers(0, 5, 3)
    check_grads(lambda x, w, b: F.cross_entropy(F.linear(x, w, b), labels), [x, w, b])
    check_grads(lambda x, w: (F.softmax(F.matmul(x, F.transpose(w))) * np.arange(15.0).reshape(3, 5)).sum(), [x, w])


def test_conv_pool_bn_fd(rng):
    x = rng.standard_normal((2, 2, 5, 5))
    w = rng.standard_normal((3, 2, 3, 3))
    weights = rng.standard_normal((2, 3, 5, 5))
    check_grads(lambda x, w: (F.conv2d(x, w, stride=2, padding=1) ** 2).sum(), [x, w])
    check_grads(lambda x: (F.avg_pool2d(x, 3, 1, 1) * x).sum(), [x])
    check_grads(lambda x: (F.max_pool2d(x, 3, 2, 1) ** 2).sum(), [x])
    check_grads(lambda x, w: (F.batch_norm(F.conv2d(x, w, padding=1)) * weights).sum(), [x, w])


class Perceptron(Module):
    def __init__(self, rng):
        self.layers = [Linear(4, 6, rng=rng), Linear(6, 5, rng=rng), Linear(5, 3, rng=rng)]

    def forward(self, x):
        for layer in self.layers[:-1]:
            x = F.relu(layer(x))
        return self.layers[-1](x)


def test_three_layer_perceptron_fd(rng):
    net = Perceptron(rng).astype(np.float64)
    x = rng.standard_normal((5, 4))
    y = rng.integers(0, 3, 5)
    params = net.parameters()
    values = [p.data.copy() for p in params]

    def build(*ts):
        for p, t in zip(params, ts):
            p.data = t.data
        return F.cross_entropy(net(Tensor(x)), y)

    analytic = grad(F.cross_entropy(net(Tensor(x)), y), params)
    from conftest import numeric_grad

    numeric = numeric_grad(lambda *arrs: float(build(*[Tensor(a) for a in arrs]).item()), values)
    for a, n in zip(analytic, numeric):
        np.testing.assert_allclose(a, n, rtol=1e-4, atol=1e-6)


# optimizers


def test_sgd_single_plain_step():
    p = Parameter(np.array([0.0]))
    p.grad = np.array([1.0], dtype=np.float32)
    SGD([p], lr=0.1, momentum=0.0, weight_decay=0.0).step()
    assert p.data.tolist() == pytest.approx([-0.1])


def test_sgd_momentum_and_decay_oracle():
    p = Parameter(np.array([1.0]))
    opt = SGD([p], lr=0.1, momentum=0.9, weight_decay=0.01)
    x, v = 1.0, 0.0
    for g in (0.5, -0.2, 0.3):
        p.grad = np.array([g], dtype=np.float32)
        opt.step()
        d = g + 0.01 * x
        v = 0.9 * v + d
        x = x - 0.1 * v
        assert p.data[0] == pytest.approx(x, rel=1e-6)
    assert opt.steps == 3


def test_adam_first_step_magnitude_is_lr():
    for g in (1e-3, 1.0, 50.0):
        p = Parameter(np.array([0.0]))
        p.grad = np.array([g], dtype=np.float32)
        Adam([p], lr=3e-4, betas=(0.5, 0.999)).step()
        assert abs(p.data[0]) == pytest.approx(3e-4, rel=1e-3)


def test_adam_state_shapes_and_counter():
    ps = [Parameter(np.zeros((2, 3))), Parameter(np.zeros(4))]
    opt = Adam(ps, lr=1e-3)
    for k in range(3):
        for p in ps:
            p.grad = np.ones_like(p.data)
        opt.step()
        assert opt.steps == k + 1
    assert [m.shape for m in opt.m] == [(2, 3), (4,)]
    assert [v.shape for v in opt.v] == [(2, 3), (4,)]


def test_sgd_on_quadratic_decreases():
    p = Parameter(np.array([1.0]))
    opt = SGD([p], lr=0.1, momentum=0.0)
    last = 1.0
    for _ in range(20):
        p.grad = None
        (p * p).sum().backward()
        opt.step()
        assert abs(p.data[0]) < last
        last = abs(p.data[0])


def test_step_without_grad_is_rejected():
    with pytest.raises(ValueError):
        SGD([Parameter(np.zeros(2))], lr=0.1).step()


def test_clip_grad_norm():
    ps = [Parameter(np.zeros(2)), Parameter(np.zeros(1))]
    ps[0].grad = np.array([3.0, 0.0], dtype=np.float32)
    ps[1].grad = np.array([4.0], dtype=np.float32)
    norm = clip_grad_norm(ps, 1.0)
    assert norm == pytest.approx(5.0)
    total = math.sqrt(sum(float((p.grad ** 2).sum()) for p in ps))
    assert total == pytest.approx(1.0, rel=1e-5)


def test_cosine_schedule_endpoints():
    assert cosine_lr(0.025, 0.001, 0, 50) == pytest.approx(0.025)
    assert cosine_lr(0.025, 0.001, 25, 50) == pytest.approx(0.013)
    lrs = [cosine_lr(0.025, 0.001, e, 50) for e in range(50)]
    assert all(a > b for a, b in zip(lrs, lrs[1:]))
