import numpy as np
import pytest

from flowbench import autodiff as ad
from flowbench.optim import Adam


def test_zero_gradient_fixed_point():
    p = ad.parameter(np.array([1.0, -2.0]))
    p.grad = np.zeros(2)
    opt = Adam([p], lr=0.1)
    opt.step()
    assert np.array_equal(p.value, np.array([1.0, -2.0]))


def test_none_gradient_skipped():
    p = ad.parameter(np.array(1.0))
    opt = Adam([p], lr=0.1)
    opt.step()
    assert p.value == 1.0


def test_first_step_is_minus_lr():
    # closed form: m_hat/(sqrt(v_hat)+eps) = g/(|g|+eps) ~ sign(g)
    p = ad.parameter(np.array(0.0))
    p.grad = np.array(1.0)
    opt = Adam([p], lr=1e-3)
    opt.step()
    assert p.value == pytest.approx(-1e-3, rel=1e-3)


def test_constant_gradient_monotone_descent():
    p = ad.parameter(np.array(5.0))
    opt = Adam([p], lr=0.01)
    values = [float(p.value)]
    for _ in range(50):
        p.grad = np.array(1.0)
        opt.step()
        values.append(float(p.value))
    assert all(b < a for a, b in zip(values, values[1:]))


def test_quadratic_convergence():
    p = ad.parameter(np.array(3.0))
    opt = Adam([p], lr=0.1)
    for _ in range(500):
        ad.zero_grad([p])
        loss = ad.square(p - 1.0)
        ad.backward(loss)
        opt.step()
    assert abs(float(p.value) - 1.0) < 1e-3


def test_nonfinite_gradient_raises():
    p = ad.parameter(np.array(1.0))
    p.grad = np.array(np.nan)
    opt = Adam([p], lr=0.1)
    with pytest.raises(FloatingPointError):
        opt.step()


def test_learning_rate_mutable_between_steps():
    p = ad.parameter(np.array(0.0))
    opt = Adam([p], lr=1.0)
    p.grad = np.array(1.0)
    opt.step()
    first = abs(float(p.value))
    opt.lr = 0.5
    before = float(p.value)
    p.grad = np.array(1.0)
    opt.step()
    assert abs(float(p.value) - before) < first


def test_nonpositive_lr_rejected():
    with pytest.raises(ValueError):
        Adam([], lr=0.0)
