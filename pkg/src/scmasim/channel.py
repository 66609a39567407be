"""Rayleigh MIMO channel, transmit-side composition, and noise calibration."""

import numpy as np


def calibrate_noise(ebn0_db, rate, M):
    """Noise spectral density N0 for unit-energy codewords at a given Eb/N0.

    Each codeword carries log2(M) coded bits at unit energy, of which a
    fraction `rate` are information bits, so Eb = 1 / (rate * log2(M)) and
    N0 = Eb / 10^(ebn0_db/10).
    """
    n_bits = int(M).bit_length() - 1
    if M < 2 or (M & (M - 1)) != 0:
        raise ValueError(f"M must be a power of 2, got {M}")
    if not 0 < rate <= 1:
        raise ValueError(f"code rate must be in (0, 1], got {rate}")
    return 1.0 / (rate * n_bits * 10.0 ** (ebn0_db / 10.0))


def sample_channel(rng, J, n_t, n_r, K, count=None):
    """i.i.d. CN(0,1) gains, shape (J, n_r, n_t, K) or (count, J, n_r, n_t, K).

    Real parts of the whole block are drawn before imaginary parts so the
    stream consumption is independent of how the result is traversed.
    """
    shape = (J, n_r, n_t, K) if count is None else (count, J, n_r, n_t, K)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def effective_channel(h, generators):
    """Per-bit effective gains diag(h_j^{n_r,n_t}) @ G_j.

    h has shape (..., J, n_r, n_t, K); returns (..., J, n_r, n_t, K, log2 M)
    where entry [..., j, nr, nt, k, m] multiplies bit m of user j sent from
    antenna nt as observed on resource k of receive antenna nr.
    """
    h = np.asarray(h)
    G = np.stack([g.matrix for g in generators])        # (J, K, B)
    return h[..., None] * G[:, None, None, :, :]


def sample_noise(rng, shape, n0):
    """Complex AWGN with E|z|^2 = n0; unit-variance draw scaled afterwards."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return np.sqrt(n0 / 2.0) * (re + 1j * im)


def transmit(bits, generators, h, n0, rng):
    """One SCMA symbol over the MIMO channel.

    bits: (J, n_t, log2 M) bipolar. h: (J, n_r, n_t, K). Returns the
    received (n_r, K) observation y = sum_{j,nt} h .* (G_j b_{j,nt}) + z
    with z ~ CN(0, n0) i.i.d. per entry; rng=None sends noiselessly.
    """
    bits = np.asarray(bits, dtype=float)
    J, n_t, n_bits = bits.shape
    n_r, K = h.shape[1], h.shape[3]
    y = np.zeros((n_r, K), dtype=complex)
    for j in range(J):
        for nt in range(n_t):
            x = generators[j].matrix @ bits[j, nt]      # (K,)
            y += h[j, :, nt, :] * x[None, :]
    if rng is not None and n0 > 0:
        y += sample_noise(rng, (n_r, K), n0)
    return y
