import json

import numpy as np
import pytest

from scmasim import codec


def test_bit_matrix_m4():
    B = codec.build_bit_matrix(4)
    assert B.tolist() == [[-1, 1, -1, 1], [-1, -1, 1, 1]]


def test_bit_matrix_orthogonality():
    # rows are Walsh-like: B B^T = M I for every supported order
    for M in (2, 4, 8, 16):
        B = codec.build_bit_matrix(M)
        assert B.shape == (int(np.log2(M)), M)
        assert np.array_equal(B @ B.T, M * np.eye(B.shape[0], dtype=int))


def test_bit_matrix_column_symmetry():
    B = codec.build_bit_matrix(8)
    for m in range(8):
        assert np.array_equal(B[:, m], -B[:, 7 - m])


def test_bit_matrix_rejects_bad_order():
    for M in (0, 3, 6, 512):
        with pytest.raises(ValueError):
            codec.build_bit_matrix(M)


def test_generator_roundtrip_linearizable():
    # any codebook of the form X = G B is recovered exactly by G = X B^T / M
    rng = np.random.default_rng(5)
    B = codec.build_bit_matrix(4)
    G = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
    X = G @ B
    cb = codec.Codebook(user=0, matrix=X, support=(0, 1, 2, 3))
    gen = codec.compute_generator(cb, B)
    assert np.allclose(gen.matrix, G, atol=1e-12)
    assert codec.verify_linearizable(cb, B) < 1e-12


def test_generator_rejects_nonlinearizable():
    B = codec.build_bit_matrix(4)
    X = np.zeros((4, 4), dtype=complex)
    X[0] = [1, 2, 3, 4]            # no bipolar-linear representation
    cb = codec.Codebook(user=0, matrix=X, support=(0,))
    with pytest.raises(codec.CodebookError):
        codec.compute_generator(cb, B)


def test_encode_matches_codebook_column():
    cbs = codec.default_codebook()
    B = cbs.bit_matrix
    for j, (cb, gen) in enumerate(zip(cbs.codebooks, cbs.generators)):
        for m in range(cbs.M):
            x = codec.encode(gen, B[:, m])
            assert np.allclose(x, cb.matrix[:, m], atol=1e-12)


def test_encode_validates_bits():
    cbs = codec.default_codebook()
    gen = cbs.generators[0]
    with pytest.raises(ValueError):
        codec.encode(gen, np.array([0, 1]))       # not bipolar
    with pytest.raises(ValueError):
        codec.encode(gen, np.array([1, -1, 1]))   # wrong length


def test_default_codebook_structure():
    cbs = codec.default_codebook()
    assert (cbs.J, cbs.K, cbs.N, cbs.M) == (6, 4, 2, 4)
    assert np.array_equal(cbs.indicator, codec.INDICATOR_4x6)
    assert cbs.bits_per_symbol == 2
    supports = [tuple(np.flatnonzero(codec.INDICATOR_4x6[:, j])) for j in range(6)]
    assert supports == [(1, 3), (0, 2), (0, 1), (2, 3), (0, 3), (1, 2)]


def test_default_codebook_energy_and_support():
    cbs = codec.default_codebook()
    for j, cb in enumerate(cbs.codebooks):
        X = cb.matrix
        rows = np.flatnonzero(codec.INDICATOR_4x6[:, j])
        off = np.setdiff1d(np.arange(4), rows)
        assert np.all(X[off] == 0)
        # every codeword has unit energy
        assert np.allclose(np.sum(np.abs(X) ** 2, axis=0), 1.0, atol=1e-12)


def test_default_codebook_block_values():
    # user j occupies a 2x2 block (1/2) [[1, w], [w, -1]], w = exp(i pi j / J)
    cbs = codec.default_codebook()
    for j, gen in enumerate(cbs.generators):
        w = np.exp(1j * np.pi * j / 6)
        rows = np.flatnonzero(codec.INDICATOR_4x6[:, j])
        block = gen.matrix[rows]
        assert np.allclose(block, 0.5 * np.array([[1, w], [w, -1]]), atol=1e-12)


def test_codebooks_pairwise_distinct():
    cbs = codec.default_codebook()
    for a in range(6):
        for b in range(a + 1, 6):
            assert not np.allclose(cbs.codebooks[a].matrix,
                                   cbs.codebooks[b].matrix)


def test_save_load_roundtrip(tmp_path):
    cbs = codec.default_codebook()
    path = tmp_path / "cb.json"
    codec.save_codebook(cbs, path)
    back = codec.load_codebook(path)
    assert back.J == cbs.J and back.M == cbs.M
    assert np.array_equal(back.indicator, cbs.indicator)
    for a, b in zip(back.codebooks, cbs.codebooks):
        assert np.allclose(a.matrix, b.matrix, atol=1e-12)
    for a, b in zip(back.generators, cbs.generators):
        assert np.allclose(a.matrix, b.matrix, atol=1e-12)


def test_load_rejects_bad_energy(tmp_path):
    cbs = codec.default_codebook()
    path = tmp_path / "cb.json"
    codec.save_codebook(cbs, path)
    blob = json.loads(path.read_text())
    blob["codebooks"][0][1][1] = [3.0, 0.0]      # breaks unit energy
    path.write_text(json.dumps(blob))
    with pytest.raises(codec.CodebookError):
        codec.load_codebook(path)


def test_load_rejects_support_mismatch(tmp_path):
    cbs = codec.default_codebook()
    path = tmp_path / "cb.json"
    codec.save_codebook(cbs, path)
    blob = json.loads(path.read_text())
    row = np.flatnonzero(np.array(codec.INDICATOR_4x6)[:, 0] == 0)[0]
    blob["codebooks"][0][int(row)][0] = [0.5, 0.0]   # energy off support
    path.write_text(json.dumps(blob))
    with pytest.raises(codec.CodebookError):
        codec.load_codebook(path)


# -- topology ---------------------------------------------------------------


def topo_uncoded(n_t=1, n_r=1, n_symbols=3):
    return codec.build_topology(codec.INDICATOR_4x6, n_t, n_r, 4,
                                n_symbols=n_symbols)


def test_topology_counts():
    t = topo_uncoded(n_t=2, n_r=2, n_symbols=5)
    # 6 users x 2 antennas x 2 bits variable nodes per symbol
    assert t.vn_per_symbol == 24
    # 4 resources x 2 receive antennas function nodes per symbol
    assert t.fn_per_symbol == 8
    # every FN touches 3 users x 2 antennas x 2 bits edges
    assert t.fn_degree == 12
    assert t.edges_per_symbol == t.fn_per_symbol * t.fn_degree
    # every VN sees its user's 2 resources on each receive antenna
    assert t.vn_fn_degree == 4
    assert t.edge_user.size == t.edges_per_symbol


def test_topology_edge_order_fn_major():
    t = topo_uncoded(n_t=1, n_r=1)
    fn = t.edge_rx * 4 + t.edge_res
    assert np.all(np.diff(fn) >= 0)              # FN-major enumeration
    # within the first FN (resource 0): users 1, 2, 4 in ascending order
    first = t.fn_degree
    assert t.edge_user[:first].tolist() == [1, 1, 2, 2, 4, 4]
    assert t.edge_bit[:first].tolist() == [0, 1, 0, 1, 0, 1]


def test_topology_vn_edge_index_consistent():
    t = topo_uncoded(n_t=2, n_r=2)
    for v in range(t.vn_per_symbol):
        edges = t.vn_edge_index[v]
        assert np.all(t.edge_vn[edges] == v)
    # each edge appears exactly once across all VN gather lists
    flat = np.sort(t.vn_edge_index.ravel())
    assert np.array_equal(flat, np.arange(t.edges_per_symbol))


def test_topology_framing_maps():
    t = topo_uncoded(n_t=2, n_symbols=4)
    B, n_t = 2, 2
    L = 4 * n_t * B
    for l in range(L):
        p = l // n_t
        assert t.sym_of_bit[l] == p // B
        # slot identifies (antenna, bit) within the symbol
        nt, m = l % n_t, p % B
        assert t.slot_of_bit[l] == nt * B + m


def test_topology_rejects_ragged_indicator():
    bad = np.array(codec.INDICATOR_4x6).copy()
    bad[0, 0] = 1                                # breaks constant weights
    with pytest.raises(ValueError):
        codec.build_topology(bad, 1, 1, 4, n_symbols=2)


def test_topology_rejects_bad_interleaver():
    with pytest.raises(ValueError):
        codec.build_topology(codec.INDICATOR_4x6, 1, 1, 4, n_symbols=2,
                             interleaver=np.zeros(4, dtype=int))


def test_topology_interleaver_identity_default():
    t = topo_uncoded(n_symbols=2)
    assert np.array_equal(t.interleaver, np.arange(2 * 1 * 2))
