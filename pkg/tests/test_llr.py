import numpy as np
import pytest

from gnndsim.channel import ChannelInstance
from gnndsim.codec import bit_llrs, estimate_residual_var, llr_init
from gnndsim.constellation import BitLabeling, Constellation, make_qpsk
from gnndsim.fronts import qpsk_estimates
from gnndsim.posterior import JointEnumeration


def test_zero_estimate_gives_zero_llrs():
    q = make_qpsk(2.0)
    out = llr_init("gnnd", q, estimates=np.zeros(5, dtype=complex), noise_scale=1.0)
    np.testing.assert_array_equal(out.values, np.zeros(10))


def test_gnnd_matches_exact_awgn_llrs_at_unit_noise(rng):
    # single user, h = 1, unit noise: the processed observation equals y and
    # the equivalent-channel residual power is exactly the channel noise
    q = make_qpsk(2.0)
    gains = np.array([[1.0 + 0j]])
    noise_var = 1.0
    enum = JointEnumeration(gains, noise_var, q)
    y = 0.9 * (rng.standard_normal(200) + 1j * rng.standard_normal(200))
    means = enum.evaluate(y[None, :]).mean(0)
    g = qpsk_estimates(means, q.power)
    np.testing.assert_allclose(g, y, atol=1e-9)
    gnnd = llr_init("gnnd", q, estimates=g, noise_scale=1.0)
    awgn = llr_init("awgn", q, y=y, noise_scale=noise_var)
    np.testing.assert_allclose(gnnd.values, awgn.values, atol=1e-9)


def test_llr_sign_follows_estimate_sign(rng):
    q = make_qpsk(2.0)
    g = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    out = llr_init("gnnd", q, estimates=g, noise_scale=0.7).values.reshape(-1, 2)
    np.testing.assert_array_equal(np.sign(out[:, 0]), np.sign(g.real))
    np.testing.assert_array_equal(np.sign(out[:, 1]), np.sign(g.imag))


def test_label_complement_flips_llr_sign(rng):
    q = make_qpsk(2.0)
    flipped_msb = Constellation(q.points, q.probabilities, q.power,
                                BitLabeling(2, q.labeling.point_to_label ^ 0b10))
    tables = rng.uniform(0, 4, size=(20, 4))
    a = bit_llrs(tables, q, 0.5).reshape(-1, 2)
    b = bit_llrs(tables, flipped_msb, 0.5).reshape(-1, 2)
    np.testing.assert_allclose(b[:, 0], -a[:, 0], atol=0)
    np.testing.assert_allclose(b[:, 1], a[:, 1], atol=0)


def test_llrs_are_clamped(rng):
    q = make_qpsk(2.0)
    out = llr_init("gnnd", q, estimates=np.array([100 + 100j]), noise_scale=1e-3)
    assert np.max(np.abs(out.values)) <= 30.0
    wide = llr_init("gnnd", q, estimates=np.array([100 + 100j]), noise_scale=1e-3,
                    llr_max=50.0)
    assert np.max(np.abs(wide.values)) == 50.0


def test_cl_llr_reduces_to_scaled_matched_filter():
    q = make_qpsk(2.0)
    y = np.array([0.5 - 0.3j])
    out = llr_init("cl", q, y=y, scalar_gain=2.0).values
    amp = np.sqrt(q.power / 2)
    expect0 = 4 * amp * 2.0 * y[0].real  # per-dimension factorization
    assert out[0] == pytest.approx(expect0, abs=1e-12)


def test_scale_validation():
    q = make_qpsk(2.0)
    with pytest.raises(ValueError):
        llr_init("gnnd", q, estimates=np.zeros(1, dtype=complex), noise_scale=0.0)
    with pytest.raises(ValueError):
        llr_init("gnnd", q, estimates=np.zeros(1, dtype=complex))
    with pytest.raises(ValueError):
        llr_init("bogus", q, estimates=np.zeros(1, dtype=complex), noise_scale=1.0)


def test_residual_var_single_user_closed_form():
    # h=1: g(y) = y / noise_var, so E|g - x|^2 = P (1 - v)^2 / v^2 + 1 / v
    power, noise_var = 2.0, 0.8
    ch = ChannelInstance(np.array([[1.0 + 0j]]), noise_var, [power])
    q = make_qpsk(power)
    est = estimate_residual_var(ch, q, 0, 200_000, np.random.default_rng(3))
    expect = power * (1 - noise_var) ** 2 / noise_var**2 + 1 / noise_var
    assert est == pytest.approx(expect, rel=0.02)


def test_residual_var_unit_at_matched_noise():
    ch = ChannelInstance(np.array([[1.0 + 0j]]), 1.0, [2.0])
    q = make_qpsk(2.0)
    est = estimate_residual_var(ch, q, 0, 100_000, np.random.default_rng(4))
    assert est == pytest.approx(1.0, rel=0.02)


def test_residual_var_huge_noise_tends_to_power():
    ch = ChannelInstance(np.array([[1.0 + 0j]]), 1e6, [2.0])
    q = make_qpsk(2.0)
    est = estimate_residual_var(ch, q, 0, 20_000, np.random.default_rng(5))
    assert est == pytest.approx(2.0, rel=0.05)


def test_residual_var_deterministic():
    ch = ChannelInstance(np.array([[1.0 + 0j], [0.5j]]), 0.5, [1.0])
    q = make_qpsk(1.0)
    a = estimate_residual_var(ch, q, 0, 5000, np.random.default_rng(6))
    b = estimate_residual_var(ch, q, 0, 5000, np.random.default_rng(6))
    assert a == b
