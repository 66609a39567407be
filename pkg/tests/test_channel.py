import numpy as np
import pytest

from scmasim import channel, codec


def test_noise_calibration_values():
    # N0 = 1 / (R log2(M) 10^(dB/10)); independently recomputed points
    assert channel.calibrate_noise(0.0, 0.5, 4) == pytest.approx(1.0)
    assert channel.calibrate_noise(3.0, 0.5, 4) == pytest.approx(
        1.0 / 10 ** 0.3, rel=1e-12)
    assert channel.calibrate_noise(0.0, 1.0, 4) == pytest.approx(0.5)
    assert channel.calibrate_noise(10.0, 0.5, 16) == pytest.approx(
        1.0 / (0.5 * 4 * 10.0), rel=1e-12)


def test_noise_calibration_validates():
    with pytest.raises(ValueError):
        channel.calibrate_noise(0.0, 0.0, 4)
    with pytest.raises(ValueError):
        channel.calibrate_noise(0.0, 1.5, 4)


def test_channel_statistics():
    rng = np.random.default_rng(11)
    h = channel.sample_channel(rng, 6, 2, 2, 4, count=4000)
    assert h.shape == (4000, 6, 2, 2, 4)
    # unit-variance complex Gaussian entries, independent halves
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, rel=0.02)
    assert np.var(h.real) == pytest.approx(0.5, rel=0.02)
    assert np.var(h.imag) == pytest.approx(0.5, rel=0.02)
    assert abs(np.mean(h)) < 0.01


def test_channel_draw_order_reproducible():
    # identical seeds give identical draws, shape-independent of count=None
    a = channel.sample_channel(np.random.default_rng(3), 6, 1, 2, 4, count=1)[0]
    b = channel.sample_channel(np.random.default_rng(3), 6, 1, 2, 4)
    assert np.array_equal(a, b)


def test_noise_scaling():
    rng = np.random.default_rng(7)
    z = channel.sample_noise(rng, (20000,), 0.25)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(0.25, rel=0.03)
    assert np.var(z.real) == pytest.approx(0.125, rel=0.03)


def test_effective_channel_shape_and_values():
    cbs = codec.default_codebook()
    rng = np.random.default_rng(1)
    h = channel.sample_channel(rng, 6, 2, 2, 4)
    Heff = channel.effective_channel(h, cbs.generators)
    assert Heff.shape == (6, 2, 2, 4, 2)
    for j in range(6):
        G = cbs.generators[j].matrix
        for nr in range(2):
            for nt in range(2):
                want = h[j, nr, nt][:, None] * G
                assert np.allclose(Heff[j, nr, nt], want)


def test_transmit_noiseless_superposition():
    cbs = codec.default_codebook()
    rng = np.random.default_rng(2)
    h = channel.sample_channel(rng, 6, 1, 2, 4)
    bits = np.sign(rng.standard_normal((6, 1, 2))).astype(int)
    y = channel.transmit(bits, cbs.generators, h, 0.0, rng=None)
    want = np.zeros((2, 4), dtype=complex)
    for j in range(6):
        x = codec.encode(cbs.generators[j], bits[j, 0])
        want += h[j, :, 0, :] * x[None, :]
    assert np.allclose(y, want, atol=1e-12)


def test_transmit_noise_power():
    cbs = codec.default_codebook()
    rng = np.random.default_rng(9)
    h = np.zeros((6, 1, 1, 4), dtype=complex)     # silence the signal path
    bits = np.ones((6, 1, 2), dtype=int)
    samples = []
    for _ in range(2000):
        y = channel.transmit(bits, cbs.generators, h, 0.5, rng=rng)
        samples.append(y)
    z = np.stack(samples)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(0.5, rel=0.05)
