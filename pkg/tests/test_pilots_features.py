"""Pilot phase and feature extractor checks."""
import numpy as np
import pytest

from fddlab import autodiff as ad
from fddlab.features import FeatureExtractor
from fddlab.pilots import PilotMatrix, normalize_pilot, receive_pilot

from test_autodiff import central_diff, rel_err


def make_pilot(seed=0, m=4, ell=6, power=1.0):
    return PilotMatrix(np.random.default_rng(seed), m, ell, power)


def test_normalize_example_column():
    # column (3, 4i) with P=1 -> (0.6, 0.8i)
    re = np.array([[3.0], [0.0]])
    im = np.array([[0.0], [4.0]])
    nre, nim = normalize_pilot(re, im, 1.0)
    assert np.allclose(nre, [[0.6], [0.0]], atol=1e-15)
    assert np.allclose(nim, [[0.0], [0.8]], atol=1e-15)


def test_normalize_idempotent_and_exact():
    p = make_pilot(power=4.0)
    norms = p.column_norms()
    assert np.allclose(norms, 2.0, atol=1e-12)
    before = (p.x_re.value.copy(), p.x_im.value.copy())
    p.normalize()
    assert np.max(np.abs(p.x_re.value - before[0])) < 1e-12
    assert np.max(np.abs(p.x_im.value - before[1])) < 1e-12


def test_normalize_zero_column_rejected():
    re = np.zeros((2, 1))
    im = np.zeros((2, 1))
    with pytest.raises(ValueError, match="zero column"):
        normalize_pilot(re, im, 1.0)


def test_identity_pilot_recovers_conjugate():
    # X = sqrt(P) [I | 0]: noiseless receive carries sqrt(P) conj(h) up front
    m, ell, power = 3, 5, 4.0
    p = make_pilot(m=m, ell=ell, power=power)
    x = np.zeros((m, ell))
    x[:, :m] = np.eye(m)
    p.x_re.value = np.sqrt(power) * x
    p.x_im.value = np.zeros_like(x)
    rng = np.random.default_rng(1)
    h = rng.normal(size=(1, m)) + 1j * rng.normal(size=(1, m))
    y_re, y_im = receive_pilot(h, p, 0.0)
    y = y_re.value + 1j * y_im.value
    assert np.allclose(y[0, :m], np.sqrt(power) * np.conj(h[0]), atol=1e-12)
    assert np.allclose(y[0, m:], 0.0, atol=1e-15)


def test_zero_channel_zero_noise():
    p = make_pilot()
    y_re, y_im = receive_pilot(np.zeros((2, 4), dtype=complex), p, 0.0)
    assert np.all(y_re.value == 0.0)
    assert np.all(y_im.value == 0.0)


def test_noise_variance_monte_carlo():
    p = make_pilot()
    rng = np.random.default_rng(123)
    sigma2 = 0.37
    y_re, y_im = receive_pilot(np.zeros((100_000, 1, 4), dtype=complex), p, sigma2, rng)
    power = np.mean(y_re.value**2 + y_im.value**2)
    assert abs(power - sigma2) / sigma2 < 0.02


def test_receive_linear_in_channel():
    p = make_pilot(seed=5)
    rng = np.random.default_rng(9)
    h1 = rng.normal(size=(1, 4)) + 1j * rng.normal(size=(1, 4))
    h2 = rng.normal(size=(1, 4)) + 1j * rng.normal(size=(1, 4))
    a, b = 1.7, -0.4

    def rx(h):
        yr, yi = receive_pilot(h, p, 0.0)
        return yr.value + 1j * yi.value

    lhs = rx(a * h1 + b * h2)
    rhs = a * rx(h1) + b * rx(h2)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_pilot_gradient_matches_finite_differences():
    p = make_pilot(seed=2, m=3, ell=4)
    rng = np.random.default_rng(3)
    h = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
    noise = rng.normal(size=(2, 4)) + 1j * rng.normal(size=(2, 4))
    r = rng.normal(size=(2, 4))

    def loss_from(x_re):
        p.x_re.value = x_re
        yr, yi = receive_pilot(h, p, 1.0, noise=noise)
        return float(ad.sum(ad.mish(yr) * r + ad.squared_norm(yi)).value)

    base = p.x_re.value.copy()
    yr, yi = receive_pilot(h, p, 1.0, noise=noise)
    ad.zero_grad(p.params())
    ad.backward(ad.sum(ad.mish(yr) * r + ad.squared_norm(yi)))
    fd = central_diff(loss_from, base.copy())
    p.x_re.value = base
    assert rel_err(p.x_re.grad, fd) < 1e-5


def make_extractor(seed=0, ell=4, d=8, hidden=(12, 10, 6)):
    return FeatureExtractor(np.random.default_rng(seed), ell, d, hidden)


def test_zero_input_zero_bias_gives_zero_features():
    # biases and batch-norm shifts start at zero, so a fresh extractor in
    # inference mode maps zero input to tanh(0) = 0
    fx = make_extractor()
    z = ad.constant(np.zeros((3, 4)))
    v = fx.extract(z, z, training=False)
    assert np.all(v.value == 0.0)


def test_extract_deterministic_in_inference():
    fx = make_extractor(seed=4)
    rng = np.random.default_rng(8)
    yr = ad.constant(rng.normal(size=(5, 4)))
    yi = ad.constant(rng.normal(size=(5, 4)))
    a = fx.extract(yr, yi, training=False).value
    b = fx.extract(yr, yi, training=False).value
    assert np.array_equal(a, b)


def test_output_inside_unit_box():
    fx = make_extractor(seed=1)
    rng = np.random.default_rng(2)
    yr = ad.constant(rng.normal(size=(64, 4)))
    yi = ad.constant(rng.normal(size=(64, 4)))
    v = fx.extract(yr, yi, training=False).value
    assert v.shape == (64, 8)
    assert np.max(np.abs(v)) < 1.0


def test_user_permutation_permutes_outputs():
    fx = make_extractor(seed=3)
    rng = np.random.default_rng(6)
    yr = rng.normal(size=(7, 4))
    yi = rng.normal(size=(7, 4))
    perm = rng.permutation(7)
    full = fx.extract(ad.constant(yr), ad.constant(yi), training=False).value
    permuted = fx.extract(ad.constant(yr[perm]), ad.constant(yi[perm]), training=False).value
    assert np.array_equal(full[perm], permuted)


def test_extractor_gradient_check():
    fx = make_extractor(seed=7, ell=3, d=4, hidden=(6, 5, 4))
    rng = np.random.default_rng(10)
    yr = rng.normal(size=(4, 3))
    yi = rng.normal(size=(4, 3))
    r = rng.normal(size=(4, 4))

    def loss():
        v = fx.extract(ad.constant(yr), ad.constant(yi), training=True, update_stats=False)
        return ad.sum(v * r)

    ad.zero_grad(fx.params())
    ad.backward(loss())
    worst = 0.0
    for p in fx.params():
        base = p.value.copy()

        def f(x):
            p.value = x
            out = float(loss().value)
            return out

        fd = central_diff(f, base.copy())
        p.value = base
        worst = max(worst, rel_err(p.grad, fd))
    assert worst < 1e-5
