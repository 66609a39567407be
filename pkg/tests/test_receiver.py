import numpy as np
import pytest

from scmasim import channel, codec, receiver


def test_llr_convention_moments():
    # L = ln(Pr(-1)/Pr(+1)): large positive L pins the mean near -1
    mu, xi = receiver.llr_to_moments(20.0)
    assert mu == pytest.approx(-1.0, abs=1e-8)
    assert xi == pytest.approx(receiver.XI_FLOOR)
    mu, xi = receiver.llr_to_moments(0.0)
    assert mu == 0.0 and xi == 1.0
    # mu = -tanh(L/2) at a generic point
    mu, _ = receiver.llr_to_moments(1.0)
    assert mu == pytest.approx(-np.tanh(0.5), abs=1e-12)
    # L = ln 3 pins the +1 hypothesis at 3/4 weight against it
    mu, xi = receiver.llr_to_moments(np.log(3.0))
    assert mu == pytest.approx(-0.5, abs=1e-12)
    assert xi == pytest.approx(0.75, abs=1e-12)


def test_clamp_llr():
    assert receiver.clamp_llr(1e9) == 30.0
    assert receiver.clamp_llr(-1e9) == -30.0
    assert receiver.clamp_llr(3.0) == 3.0


def test_hard_decision_rule():
    out = receiver.hard_decision(np.array([2.0, 0.0, -0.5]))
    assert out.tolist() == [0, 0, 1]


def test_fn_to_vn_single_edge_example():
    # lone user: mu = y/h, xi = n0/|h|^2
    mu, xi, fb = receiver.fn_to_vn(
        mu_in=np.zeros(1, dtype=complex), xi_in=np.ones(1),
        y_edge=np.array([2.0 + 0j]), hbar=np.array([1.0 + 0j]),
        n0=0.5, fn_degree=1)
    assert mu[0] == pytest.approx(2.0)
    assert xi[0] == pytest.approx(0.5)
    assert fb == 0


def test_fn_to_vn_interference_cancellation_example():
    # two edges on one FN: target sees y minus the other's mean, noise plus
    # its power-weighted variance: mu = (2-1)/1 = 1, xi = (0.5+0.2)/1 = 0.7
    mu_in = np.array([0.0 + 0j, 1.0 + 0j])
    xi_in = np.array([1.0, 0.2])
    y = np.array([2.0 + 0j, 2.0 + 0j])
    h = np.array([1.0 + 0j, 1.0 + 0j])
    mu, xi, fb = receiver.fn_to_vn(mu_in, xi_in, y, h, n0=0.5, fn_degree=2)
    assert mu[0] == pytest.approx(1.0)
    assert xi[0] == pytest.approx(0.7)
    assert fb == 0


def test_fn_to_vn_scale_invariant_mean():
    # scaling y and h together leaves mu alone; noise-free xi = n0/|c h|^2
    for c in (2.0, 0.5 - 1.5j):
        mu, xi, _ = receiver.fn_to_vn(
            np.zeros(1, dtype=complex), np.full(1, 1e-30),
            np.array([2.0 * c]), np.array([1.0 * c]), 0.5, 1)
        assert mu[0] == pytest.approx(2.0)
        assert xi[0] == pytest.approx(0.5 / abs(c) ** 2)


def test_fn_to_vn_complex_gain():
    h = np.array([1j])
    mu, xi, _ = receiver.fn_to_vn(np.zeros(1, dtype=complex), np.ones(1),
                                  np.array([1.0 + 1j]), h, 0.5, 1)
    assert mu[0] == pytest.approx((1.0 + 1j) / 1j)
    assert xi[0] == pytest.approx(0.5)


def test_fn_to_vn_dead_edge_fallback():
    mu, xi, fb = receiver.fn_to_vn(np.zeros(2, dtype=complex), np.ones(2),
                                   np.array([1.0 + 0j, 1.0 + 0j]),
                                   np.array([0.0 + 0j, 1.0 + 0j]), 0.5, 2)
    assert fb == 1
    assert mu[0] == 0.0 and xi[0] == receiver.XI_CEIL
    assert np.isfinite(mu[1]) and xi[1] < receiver.XI_CEIL


def test_fn_to_vn_llr_exact_example():
    L = receiver.fn_to_vn_llr(np.array([0.5 + 0j]), np.array([0.5]))
    assert L[0] == pytest.approx(-4.0)


def test_fn_to_vn_llr_paper_example():
    L = receiver.fn_to_vn_llr(np.array([0.5 + 0j]), np.array([0.5]),
                              mode="paper")
    assert L[0] == pytest.approx(np.log(0.25 / 2.25), abs=1e-12)
    assert L[0] == pytest.approx(-2.1972245773362196, abs=1e-12)


def test_fn_to_vn_llr_clamped():
    L = receiver.fn_to_vn_llr(np.array([1.0 + 0j]), np.array([1e-9]))
    assert L[0] == -30.0
    L = receiver.fn_to_vn_llr(np.array([1.0 + 0j]), np.array([1e-9]),
                              mode="paper")
    assert L[0] == -30.0


def test_vn_to_fn_division_example():
    # posterior (0.2, 0.5) divided by message (0.1, 1.0): 1/xi = 2 - 1 = 1,
    # mu = (0.2/0.5 - 0.1/1.0) * 1 = 0.3
    mu, xi, fb = receiver.vn_to_fn(
        mu_post=np.array([0.2 + 0j]), xi_post=np.array([0.5]),
        mu_f2v=np.array([0.1 + 0j]), xi_f2v=np.array([1.0]),
        mu_prev=np.zeros(1, dtype=complex), xi_prev=np.ones(1))
    assert mu[0] == pytest.approx(0.3)
    assert xi[0] == pytest.approx(1.0)
    assert fb == 0


def test_vn_to_fn_damping_blends_mean_and_precision():
    mu, xi, _ = receiver.vn_to_fn(
        mu_post=np.array([0.2 + 0j]), xi_post=np.array([0.5]),
        mu_f2v=np.array([0.1 + 0j]), xi_f2v=np.array([1.0]),
        mu_prev=np.array([0.5 + 0j]), xi_prev=np.array([2.0]),
        damping=0.25)
    assert mu[0] == pytest.approx(0.25 * 0.5 + 0.75 * 0.3)
    assert 1.0 / xi[0] == pytest.approx(0.25 * 0.5 + 0.75 * 1.0)


def test_vn_to_fn_fallback_on_nonpositive_precision():
    # posterior wider than the divided message: division is degenerate, the
    # previous message is retained and the event counted
    mu, xi, fb = receiver.vn_to_fn(
        mu_post=np.array([0.0 + 0j]), xi_post=np.array([2.0]),
        mu_f2v=np.array([0.0 + 0j]), xi_f2v=np.array([1.0]),
        mu_prev=np.array([0.7 + 0j]), xi_prev=np.array([3.0]),
        damping=0.3)
    assert fb == 1
    assert mu[0] == pytest.approx(0.7)
    assert xi[0] == pytest.approx(3.0)


def test_vn_to_fn_variance_clipped():
    mu, xi, fb = receiver.vn_to_fn(
        mu_post=np.array([0.0 + 0j]), xi_post=np.array([1.0 - 1e-12]),
        mu_f2v=np.array([0.0 + 0j]), xi_f2v=np.array([1.0]),
        mu_prev=np.zeros(1, dtype=complex), xi_prev=np.ones(1))
    assert fb == 0
    assert xi[0] <= receiver.XI_CEIL


def test_vn_to_cn_message_example():
    # FN sum plus the other checks' LLRs: 0.5 - 0.2 + 0.4 = 0.7
    out = receiver.vn_to_cn_message(
        fn_llrs=[0.5, -0.2], cn_llrs=[0.3, 0.4], target=0)
    assert out == pytest.approx(0.7)
    # single check: FN sum only
    assert receiver.vn_to_cn_message([0.5, -0.2], [0.9], 0) == pytest.approx(0.3)


def test_vn_gather_message_example():
    # all checks plus the other FNs: -0.2 + 0.3 + 0.4 = 0.5
    out = receiver.vn_gather_message(
        fn_llrs=[0.5, -0.2], cn_llrs=[0.3, 0.4], target_fn=0)
    assert out == pytest.approx(0.5)
    # sign symmetry
    neg = receiver.vn_gather_message(
        fn_llrs=[-0.5, 0.2], cn_llrs=[-0.3, -0.4], target_fn=0)
    assert neg == pytest.approx(-0.5)
    # lone FN and no checks: nothing to gather
    assert receiver.vn_gather_message([1.3], [], 0) == 0.0


def test_gather_messages_clamped():
    assert receiver.vn_to_cn_message([40.0, 40.0], [0.0], 0) == 30.0
    assert receiver.vn_gather_message([0.0, -40.0], [-40.0], 0) == -30.0


def test_receiver_config_validation():
    with pytest.raises(ValueError):
        receiver.ReceiverConfig(scheme="mpa")
    with pytest.raises(ValueError):
        receiver.ReceiverConfig(damping=1.0)
    with pytest.raises(ValueError):
        receiver.ReceiverConfig(n_iter=0)
    with pytest.raises(ValueError):
        receiver.ReceiverConfig(llr_mode="fancy")


# -- full-frame behaviour ----------------------------------------------------


def single_user_setup():
    """Topology with one user on two resources, no parity code."""
    F = np.array([[1], [1]], dtype=np.uint8)
    topo = codec.build_topology(F, 1, 1, 4, n_symbols=1)
    w = np.exp(1j * np.pi / 6)
    G = 0.5 * np.array([[1.0, w], [w, -1.0]])
    gen = codec.GeneratorMatrix(matrix=G, support=(0, 1))
    return topo, gen


def test_single_user_noiseless_exact_first_iteration():
    # with no interference or noise the detector recovers both bits in one
    # iteration regardless of the channel draw
    topo, gen = single_user_setup()
    dec = receiver.FrameDecoder(topo, [gen])
    rng = np.random.default_rng(123)
    for trial in range(10):
        bits = np.sign(rng.standard_normal(2))
        h = channel.sample_channel(rng, 1, 1, 1, 2)
        x = gen.matrix @ bits
        y = (h[0, 0, 0] * x)[None, None, :]
        out = dec.decode(y, h[None], 1e-6,
                         receiver.ReceiverConfig(scheme="ssg", n_iter=1,
                                                 early_stop=False))
        want = ((1 + bits) // 2).astype(np.uint8)    # bit 0 <-> -1
        assert np.array_equal(out.info_bits[0], want)


def test_decode_counters_scale_with_iterations():
    topo, gen = single_user_setup()
    dec = receiver.FrameDecoder(topo, [gen])
    rng = np.random.default_rng(5)
    h = channel.sample_channel(rng, 1, 1, 1, 2)[None]
    y = np.zeros((1, 1, 2), dtype=complex)
    edges = topo.edges_per_symbol
    for n in (1, 3, 7):
        out = dec.decode(y, h, 1.0, receiver.ReceiverConfig(
            scheme="ssg", n_iter=n, early_stop=False))
        assert out.iterations == n
        assert out.fn_updates == n * edges
        assert out.cn_updates == 0                 # uncoded run


def test_map_oracle_single_user_matches_closed_form():
    # one BPSK-like bit pair, noiseless: the oracle must put all posterior
    # mass on the transmitted word
    topo, gen = single_user_setup()
    rng = np.random.default_rng(17)
    bits = np.array([1.0, -1.0])
    h = channel.sample_channel(rng, 1, 1, 1, 2)
    y = (h[0, 0, 0] * (gen.matrix @ bits))[None, None, :]
    L = receiver.map_oracle(y, h[None], 1e-9, topo, [gen])
    want_sign = np.where(bits > 0, -1.0, 1.0)      # bit 1 -> negative LLR
    assert np.all(np.sign(L[0]) == want_sign)
    assert np.all(np.abs(L[0]) > 10)


def test_map_oracle_rejects_wide_graphs():
    cbs = codec.default_codebook()
    topo = codec.build_topology(cbs.indicator, 2, 1, 4, n_symbols=1)
    y = np.zeros((1, 1, 4), dtype=complex)
    h = np.zeros((1, 6, 1, 2, 4), dtype=complex)
    with pytest.raises(ValueError):
        receiver.map_oracle(y, h, 1.0, topo, cbs.generators)


def test_epa_matches_map_on_uncoded_frame():
    # six-user uncoded detection at high SNR agrees with the exact
    # marginalizer on the vast majority of bits
    cbs = codec.default_codebook()
    topo = codec.build_topology(cbs.indicator, 1, 1, 4, n_symbols=40)
    dec = receiver.FrameDecoder(topo, cbs.generators)
    rng = np.random.default_rng(42)
    n0 = channel.calibrate_noise(12.0, 1.0, 4)
    G = np.stack([g.matrix for g in cbs.generators])

    bits = np.sign(rng.standard_normal((40, 6, 1, 2)))
    h1 = channel.sample_channel(rng, 6, 1, 1, 4)
    h = np.broadcast_to(h1, (40,) + h1.shape).copy()
    y = np.einsum("sjrnk,sjnk->srk", h[:, :, :, :, :],
                  np.einsum("jkm,sjnm->sjnk", G, bits))
    y = y + channel.sample_noise(rng, y.shape, n0)

    out = dec.decode(y, h, n0, receiver.ReceiverConfig(scheme="ssg",
                                                       early_stop=False))
    L = receiver.map_oracle(y, h, n0, topo, cbs.generators)
    map_bits = receiver.hard_decision(L)
    stream_map = np.stack([
        map_bits[topo.sym_of_bit, j * topo.n_t * 2 + topo.slot_of_bit]
        for j in range(6)])
    agree = np.mean(out.coded_bits == stream_map)
    assert agree > 0.9


def test_fallback_events_counted_for_dead_antenna():
    topo, gen = single_user_setup()
    dec = receiver.FrameDecoder(topo, [gen])
    h = np.zeros((1, 1, 1, 1, 2), dtype=complex)    # all gains dead
    y = np.zeros((1, 1, 2), dtype=complex)
    out = dec.decode(y, h, 1.0, receiver.ReceiverConfig(
        scheme="ssg", n_iter=2, early_stop=False))
    assert out.fallback_events >= topo.edges_per_symbol
