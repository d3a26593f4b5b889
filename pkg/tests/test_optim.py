import numpy as np
import pytest

from motionadapt.autodiff import Tensor
from motionadapt.optim import MomentumSGD, cosine_lr, sgd_step


def test_sgd_step_plain():
    p = np.array([1.0])
    v = np.zeros(1)
    sgd_step(p, np.array([2.0]), v, lr=0.5, momentum=0.0)
    assert p[0] == 0.0


def test_sgd_step_momentum_matches_hand_recurrence():
    p = np.array([1.0, -2.0])
    v = np.zeros(2)
    g1 = np.array([0.3, -0.1])
    g2 = np.array([-0.2, 0.4])
    lr, m = 0.1, 0.9

    # hand-rolled recurrence
    hp, hv = p.copy(), np.zeros(2)
    for g in (g1, g2):
        hv = m * hv + g
        hp = hp - lr * hv

    sgd_step(p, g1, v, lr, m)
    sgd_step(p, g2, v, lr, m)
    assert np.allclose(p, hp)


def test_sgd_step_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        sgd_step(np.zeros(3), np.zeros(2), np.zeros(3), 0.1, 0.9)


def test_sgd_step_validates_hyperparameters():
    with pytest.raises(ValueError):
        sgd_step(np.zeros(1), np.zeros(1), np.zeros(1), 0.0, 0.9)
    with pytest.raises(ValueError):
        sgd_step(np.zeros(1), np.zeros(1), np.zeros(1), 0.1, 1.0)


def test_cosine_lr_endpoints_and_midpoint():
    assert cosine_lr(0, 100, 0.3) == pytest.approx(0.3)
    assert cosine_lr(100, 100, 0.3) == pytest.approx(0.0, abs=1e-15)
    assert cosine_lr(50, 100, 0.3) == pytest.approx(0.15)


def test_cosine_lr_monotone_nonincreasing():
    values = [cosine_lr(t, 200, 1.0) for t in range(201)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_momentum_sgd_skips_missing_grads():
    p = Tensor(np.ones(3), requires_grad=True)
    opt = MomentumSGD([p], momentum=0.9)
    opt.step(0.1)  # no grad accumulated yet
    assert np.array_equal(p.data, np.ones(3))
    p.grad = np.full(3, 2.0)
    opt.step(0.1)
    assert np.allclose(p.data, np.ones(3) - 0.2)
