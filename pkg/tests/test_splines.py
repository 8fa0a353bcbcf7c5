import numpy as np
import pytest

from flowbench import autodiff as ad
from flowbench.splines import (MIN_DERIVATIVE, build_spline_params,
                               build_spline_params_ad, spline_forward,
                               spline_forward_ad, spline_inverse,
                               spline_inverse_ad)
from conftest import central_difference


def test_raw_zero_gives_uniform_bins_and_unit_derivatives():
    kx, ky, dv = build_spline_params(np.zeros((1, 23)), 8, 16.0)
    # the bin-width floor is allocated so uniform input keeps exact 2B/K bins
    assert np.allclose(np.diff(kx[0]), 4.0, atol=1e-12)
    assert np.allclose(np.diff(ky[0]), 4.0, atol=1e-12)
    assert np.allclose(dv[0], 1.0, atol=0.0)  # offset softplus: exactly 1


def test_raw_zero_is_exact_identity():
    kx, ky, dv = build_spline_params(np.zeros((200, 23)), 8, 16.0)
    x = np.linspace(-20.0, 20.0, 200)
    y, logd = spline_forward(x, kx, ky, dv, 16.0)
    assert np.allclose(y, x, atol=1e-12)
    assert np.allclose(logd, 0.0, atol=1e-12)


def test_knots_pinned_at_boundaries(rng):
    raw = rng.standard_normal((50, 3 * 8 - 1)) * 3.0
    kx, ky, dv = build_spline_params(raw, 8, 16.0)
    assert np.all(kx[:, 0] == -16.0) and np.all(kx[:, -1] == 16.0)
    assert np.all(ky[:, 0] == -16.0) and np.all(ky[:, -1] == 16.0)
    assert np.all(np.diff(kx, axis=1) > 0)
    assert np.all(np.diff(ky, axis=1) > 0)
    assert np.all(dv > 0)
    assert np.all(dv[:, 0] == 1.0) and np.all(dv[:, -1] == 1.0)
    assert np.all(dv[:, 1:-1] >= MIN_DERIVATIVE)


def test_k2_hand_computed_knots():
    # widths softmax([ln 3, 0]) = [3/4, 1/4], floored and scaled to 2B = 2
    raw = np.array([[np.log(3.0), 0.0,    # widths
                     0.0, 0.0,            # heights (uniform)
                     0.3]])               # one internal derivative
    kx, ky, dv = build_spline_params(raw, 2, 1.0)
    w_hi = 2.0 * (0.75 * 0.999 + 0.0005)
    assert kx[0, 1] == pytest.approx(-1.0 + w_hi, abs=1e-15)
    assert np.allclose(ky[0], [-1.0, 0.0, 1.0], atol=1e-15)
    expected_d = MIN_DERIVATIVE + np.logaddexp(
        0.0, 0.3 + np.log(np.expm1(1.0 - MIN_DERIVATIVE)))
    assert dv[0, 1] == pytest.approx(expected_d, abs=1e-15)


def test_wrong_parameter_width_rejected():
    with pytest.raises(ValueError):
        build_spline_params(np.zeros((1, 10)), 8, 16.0)


def test_single_bin_hand_case():
    # K=1, B=1, diagonal knots, boundary derivatives forced to 2 by hand:
    # y = -1 + 2(th^2 + 2 th(1-th)) / (1 + 2 th(1-th)); at x=0.5 -> 4/11
    kx = np.array([[-1.0, 1.0]])
    ky = np.array([[-1.0, 1.0]])
    dv = np.array([[2.0, 2.0]])
    y, logd = spline_forward(np.array([0.5]), kx, ky, dv, 1.0)
    assert y[0] == pytest.approx(4.0 / 11.0, abs=1e-12)
    assert np.exp(logd[0]) == pytest.approx(104.0 / 121.0, abs=1e-12)
    # derivative against central difference
    eps = 1e-6
    yp, _ = spline_forward(np.array([0.5 + eps]), kx, ky, dv, 1.0)
    ym, _ = spline_forward(np.array([0.5 - eps]), kx, ky, dv, 1.0)
    assert (yp[0] - ym[0]) / (2 * eps) == pytest.approx(np.exp(logd[0]), abs=1e-6)
    # inverse recovers x = 0.5
    x_back, logd_inv = spline_inverse(y, kx, ky, dv, 1.0)
    assert x_back[0] == pytest.approx(0.5, abs=1e-10)
    assert logd_inv[0] == pytest.approx(-logd[0], abs=1e-10)


def test_single_bin_builder_is_identity():
    # with K=1 the softmax is degenerate: always one full-width bin
    kx, ky, dv = build_spline_params(np.array([[0.7, -1.2]]), 1, 1.0)
    y, logd = spline_forward(np.array([0.5]), kx, ky, dv, 1.0)
    assert y[0] == pytest.approx(0.5, abs=1e-12)
    assert logd[0] == pytest.approx(0.0, abs=1e-12)


def test_monotonicity_random_parameters(rng):
    for _ in range(100):
        raw = rng.standard_normal((1, 3 * 8 - 1)) * 2.0
        kx, ky, dv = build_spline_params(raw, 8, 16.0)
        x = np.sort(rng.uniform(-16.0, 16.0, size=1000))
        reps = np.repeat(np.arange(1), 1000)
        y, logd = spline_forward(x, kx[reps], ky[reps], dv[reps], 16.0)
        assert np.all(np.exp(logd) > 0.0)
        assert np.all(np.diff(y) > 0.0)


def test_knot_continuity(rng):
    eps = 1e-9
    for _ in range(20):
        raw = rng.standard_normal((1, 3 * 8 - 1)) * 2.0
        kx, ky, dv = build_spline_params(raw, 8, 16.0)
        inner = kx[0, 1:-1]
        pts = np.concatenate([inner - eps, inner + eps])
        reps = np.zeros(pts.size, dtype=int)
        y, logd = spline_forward(pts, kx[reps], ky[reps], dv[reps], 16.0)
        n = inner.size
        dy = np.abs(y[:n] - y[n:])
        max_deriv = np.exp(np.abs(logd)).max()
        assert np.all(dy <= 1e-9 + 4.0 * eps * max_deriv)
        # both one-sided derivatives converge to the shared knot value d_k
        derivs = np.exp(logd)
        d_knots = dv[0, 1:-1]
        assert np.all(np.abs(derivs[:n] - d_knots) < 1e-3 * (1.0 + d_knots))
        assert np.all(np.abs(derivs[n:] - d_knots) < 1e-3 * (1.0 + d_knots))


def test_roundtrip_wide_range(rng):
    raw = rng.standard_normal((10_000, 23)) * 2.0
    kx, ky, dv = build_spline_params(raw, 8, 16.0)
    x = rng.uniform(-32.0, 32.0, size=10_000)
    y, logd_f = spline_forward(x, kx, ky, dv, 16.0)
    x_back, logd_i = spline_inverse(y, kx, ky, dv, 16.0)
    assert np.max(np.abs(x_back - x)) < 1e-8
    assert np.max(np.abs(logd_f + logd_i)) < 1e-8


def test_ad_params_match_numpy(rng):
    raw = rng.standard_normal((5, 4, 23))
    kx, ky, dv = build_spline_params(raw, 8, 16.0)
    kx_n, ky_n, dv_n = build_spline_params_ad(ad.constant(raw), 8, 16.0)
    assert np.allclose(kx, kx_n.value, atol=1e-14)
    assert np.allclose(ky, ky_n.value, atol=1e-14)
    assert np.allclose(dv, dv_n.value, atol=1e-14)


def test_ad_forward_inverse_match_kernels(rng):
    raw = rng.standard_normal((200, 23))
    kx, ky, dv = build_spline_params(raw, 8, 16.0)
    x = rng.uniform(-20.0, 20.0, size=200)
    y_np, l_np = spline_forward(x, kx, ky, dv, 16.0)
    y_ad, l_ad = spline_forward_ad(ad.constant(x), ad.constant(kx),
                                   ad.constant(ky), ad.constant(dv), 16.0)
    assert np.allclose(y_np, y_ad.value, atol=1e-12)
    assert np.allclose(l_np, l_ad.value, atol=1e-12)
    x_np, li_np = spline_inverse(y_np, kx, ky, dv, 16.0)
    x_ad, li_ad = spline_inverse_ad(ad.constant(y_np), ad.constant(kx),
                                    ad.constant(ky), ad.constant(dv), 16.0)
    assert np.allclose(x_np, x_ad.value, atol=1e-10)
    assert np.allclose(li_np, li_ad.value, atol=1e-10)


def test_ad_inverse_gradient_matches_finite_differences(rng):
    raw0 = rng.standard_normal(23) * 0.5
    y_pts = rng.uniform(-10.0, 10.0, size=6)

    def loss_value(raw_flat):
        raw = ad.constant(raw_flat.reshape(1, 23))
        kx, ky, dv = build_spline_params_ad(raw, 8, 16.0)
        reps = np.zeros(6, dtype=int)
        x, logd = spline_inverse_ad(
            ad.constant(y_pts),
            ad.Node(kx.value[reps], (kx,), None, requires_grad=False),
            ad.Node(ky.value[reps], (ky,), None, requires_grad=False),
            ad.Node(dv.value[reps], (dv,), None, requires_grad=False), 16.0)
        return float(ad.nsum(ad.square(x) + logd).value)

    # gradient through the full AD path
    raw = ad.parameter(raw0.reshape(1, 23).copy())
    kx, ky, dv = build_spline_params_ad(raw, 8, 16.0)
    kx6 = ad.getitem(kx, (np.zeros(6, dtype=int), slice(None)))
    ky6 = ad.getitem(ky, (np.zeros(6, dtype=int), slice(None)))
    dv6 = ad.getitem(dv, (np.zeros(6, dtype=int), slice(None)))
    x, logd = spline_inverse_ad(ad.constant(y_pts), kx6, ky6, dv6, 16.0)
    out = ad.nsum(ad.square(x) + logd)
    ad.backward(out)

    def fn(flat):
        return loss_with_raw(flat)

    def loss_with_raw(flat):
        raw_c = ad.constant(flat.reshape(1, 23))
        kxc, kyc, dvc = build_spline_params_ad(raw_c, 8, 16.0)
        kxc6 = ad.getitem(kxc, (np.zeros(6, dtype=int), slice(None)))
        kyc6 = ad.getitem(kyc, (np.zeros(6, dtype=int), slice(None)))
        dvc6 = ad.getitem(dvc, (np.zeros(6, dtype=int), slice(None)))
        xc, lc = spline_inverse_ad(ad.constant(y_pts), kxc6, kyc6, dvc6, 16.0)
        return float(ad.nsum(ad.square(xc) + lc).value)

    num = central_difference(fn, raw0.copy(), step=1e-6)
    scale = np.maximum(np.abs(num), 1.0)
    assert np.max(np.abs(raw.grad.ravel() - num) / scale) < 1e-5
