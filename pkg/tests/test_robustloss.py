import math

import numpy as np
import pytest
from conftest import check_grads
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rnas.autodiff import ShapeError, Tensor, grad
from rnas.autodiff import functional as F
from rnas.robustloss import F_KINDS, RegularizerConfig, discrepancy, robust_loss

logit_arrays = arrays(np.float64, (3, 4), elements=st.floats(-10, 10, allow_nan=False))


@pytest.mark.parametrize("kind", F_KINDS)
def test_identical_logits_give_exact_zero(kind):
    z = np.random.default_rng(0).standard_normal((5, 4)).astype(np.float32)
    assert discrepancy(Tensor(z), Tensor(z.copy()), kind).item() == 0.0


def test_kl_scalar_oracle():
    clean = Tensor(np.log([[0.75, 0.25]]))
    pert = Tensor(np.zeros((1, 2)))
    expect = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    assert discrepancy(clean, pert, "kl").item() == pytest.approx(expect, rel=1e-12)
    assert expect == pytest.approx(0.1308, abs=1e-4)


def test_l2_and_cosine_oracles():
    a = np.array([[1.0, 0.0], [0.0, 2.0]])
    b = np.array([[0.0, 1.0], [0.0, 3.0]])
    assert discrepancy(Tensor(a), Tensor(b), "l2").item() == pytest.approx((2.0 + 1.0) / 2)
    assert discrepancy(Tensor(a), Tensor(b), "cosine").item() == pytest.approx((1.0 + 0.0) / 2)


@settings(max_examples=100, deadline=None)
@given(logit_arrays, logit_arrays, st.sampled_from(F_KINDS))
def test_discrepancy_is_non_negative(a, b, kind):
    assert discrepancy(Tensor(a), Tensor(b), kind).item() >= 0.0


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        discrepancy(Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 3))))
    with pytest.raises(ValueError):
        discrepancy(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))), "js")


def test_lambda_zero_is_task_loss():
    task, disc = Tensor(np.float32(0.5)), Tensor(np.float32(0.2))
    assert robust_loss(task, disc, 0.0).item() == task.item()
    assert robust_loss(Tensor(0.5), Tensor(0.2), 1.0).item() == pytest.approx(0.7)


def test_regularizer_config_validation():
    assert RegularizerConfig().lam == 1.0
    with pytest.raises(ValueError):
        RegularizerConfig(lam=-1)
    with pytest.raises(ValueError):
        RegularizerConfig(f_kind="js")


@pytest.mark.parametrize("kind", F_KINDS)
def test_robust_loss_gradient_splits(kind):
    rng = np.random.default_rng(1)
    x = rng.random((4, 5))
    x_pert = x + rng.uniform(-0.03, 0.03, x.shape)
    y = rng.integers(0, 3, 4)
    lam = 0.7

    def parts(w):
        task = F.cross_entropy(F.linear(Tensor(x), w), y)
        disc = discrepancy(F.linear(Tensor(x), w), F.linear(Tensor(x_pert), w), kind)
        return task, disc

    w0 = rng.standard_normal((3, 5))
    w = Tensor(w0, requires_grad=True)
    task, disc = parts(w)
    (g_total,) = grad(robust_loss(task, disc, lam), [w])
    w = Tensor(w0, requires_grad=True)
    (g_task,) = grad(parts(w)[0], [w])
    w = Tensor(w0, requires_grad=True)
    (g_disc,) = grad(parts(w)[1], [w])
    np.testing.assert_allclose(g_total, g_task + lam * g_disc, rtol=1e-12, atol=1e-14)
    check_grads(lambda w: robust_loss(*parts(w), lam), [w0])
