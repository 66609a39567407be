"""Sparse codebooks, their linear bit-domain form, and the merged graph topology.

A codebook maps groups of log2(M) bits onto K shared resources, with only N
of the K rows active per user. Codebooks whose columns satisfy
X[:, m] == -X[:, M-1-m] factor exactly as X = G @ B for a fixed bipolar bit
matrix B, which lets the whole detector run on bit-level variable nodes.
"""

import json
from dataclasses import dataclass, field

import numpy as np

LINEARIZABLE_TOL_LOAD = 1e-6
ENERGY_TOL = 1e-9


class CodebookError(ValueError):
    """Raised when a codebook file or matrix violates a named invariant."""


def build_bit_matrix(M):
    """Bipolar bit matrix with column m = binary expansion of m, 0 -> -1, 1 -> +1.

    Row 0 is the least-significant (fastest alternating) bit. Returns an
    int8 array of shape (log2(M), M) satisfying B @ B.T == M * I.
    """
    if not isinstance(M, (int, np.integer)) or M < 2 or (M & (M - 1)) != 0:
        raise ValueError(f"codebook size must be a power of 2 >= 2, got {M!r}")
    if M > 256:
        raise ValueError(f"codebook size {M} exceeds the supported maximum 256")
    n_bits = int(M).bit_length() - 1
    cols = np.arange(M)
    rows = np.arange(n_bits)
    bits = (cols[None, :] >> rows[:, None]) & 1
    return (2 * bits - 1).astype(np.int8)


@dataclass(frozen=True)
class Codebook:
    """Per-user complex codebook: K x M matrix with N nonzero rows."""

    user: int
    matrix: np.ndarray        # (K, M) complex
    support: tuple            # sorted row indices with nonzero entries


@dataclass(frozen=True)
class GeneratorMatrix:
    """Linear encoder G with x = G @ b for bipolar bit vectors b."""

    matrix: np.ndarray        # (K, log2 M) complex
    support: tuple


def compute_generator(codebook, bit_matrix):
    """Least-squares generator G = X B^T (B B^H)^-1; exact for symmetric codebooks.

    Since B @ B.T = M * I this reduces to (1/M) X B^T. Raises CodebookError
    when the reconstruction residual exceeds the load tolerance, i.e. the
    codebook is not expressible as a linear map of bipolar bits.
    """
    X = np.asarray(codebook.matrix if isinstance(codebook, Codebook) else codebook,
                   dtype=complex)
    B = np.asarray(bit_matrix, dtype=float)
    if X.shape[1] != B.shape[1]:
        raise ValueError(
            f"codebook has {X.shape[1]} columns but bit matrix expects {B.shape[1]}")
    M = B.shape[1]
    G = X @ B.T / M
    residual = float(np.linalg.norm(X - G @ B))
    if residual > LINEARIZABLE_TOL_LOAD:
        raise CodebookError(
            f"codebook is not linearizable: reconstruction residual {residual:.3e} "
            f"(columns must satisfy X[:,m] == -X[:,M-1-m])")
    support = tuple(np.flatnonzero(np.abs(X).sum(axis=1) > 0).tolist())
    G = G.copy()
    outside = np.setdiff1d(np.arange(X.shape[0]), support)
    G[outside, :] = 0.0
    return GeneratorMatrix(matrix=G, support=support)


def verify_linearizable(codebook, bit_matrix):
    """Frobenius residual of the best linear fit, 0 for symmetric codebooks."""
    X = np.asarray(codebook.matrix if isinstance(codebook, Codebook) else codebook,
                   dtype=complex)
    B = np.asarray(bit_matrix, dtype=float)
    G = X @ B.T / B.shape[1]
    return float(np.linalg.norm(X - G @ B))


def encode(generator, bits):
    """One codeword x = G @ b from a bipolar bit vector b."""
    G = generator.matrix if isinstance(generator, GeneratorMatrix) else np.asarray(generator)
    b = np.asarray(bits)
    if b.shape != (G.shape[1],):
        raise ValueError(f"expected {G.shape[1]} bits, got shape {b.shape}")
    if not np.all(np.abs(b) == 1):
        raise ValueError("bits must be bipolar (+1/-1)")
    return G @ b.astype(float)


# Indicator matrix with K=4 resources, J=6 users, N=2 resources per user.
INDICATOR_4x6 = np.array(
    [[0, 1, 1, 0, 1, 0],
     [1, 0, 1, 0, 0, 1],
     [0, 1, 0, 1, 0, 1],
     [1, 0, 0, 1, 1, 0]], dtype=np.uint8)


@dataclass(frozen=True)
class CodebookSet:
    """All users' codebooks plus the shared resource indicator matrix."""

    M: int
    K: int
    N: int
    J: int
    indicator: np.ndarray              # (K, J) uint8
    codebooks: tuple                   # J Codebook entries
    generators: tuple                  # J GeneratorMatrix entries
    bit_matrix: np.ndarray = field(repr=False, default=None)

    @property
    def bits_per_symbol(self):
        return int(self.M).bit_length() - 1


def default_codebook():
    """Built-in J=6, K=4, N=2, M=4 codebook set.

    User j (1-based) occupies the two resources of column j of the 4x6
    indicator; its nonzero generator block is (1/2) [[1, w], [w, -1]] with
    w = exp(i*pi*(j-1)/J). Every codeword then has unit energy and users
    carry distinct phase signatures.
    """
    J, K, M, N = 6, 4, 4, 2
    B = build_bit_matrix(M)
    codebooks = []
    generators = []
    for j in range(J):
        rows = np.flatnonzero(INDICATOR_4x6[:, j])
        w = np.exp(1j * np.pi * j / J)
        G = np.zeros((K, 2), dtype=complex)
        G[rows[0], 0] = 0.5
        G[rows[0], 1] = 0.5 * w
        G[rows[1], 0] = 0.5 * w
        G[rows[1], 1] = -0.5
        X = G @ B
        support = tuple(int(r) for r in rows)
        codebooks.append(Codebook(user=j, matrix=X, support=support))
        generators.append(GeneratorMatrix(matrix=G, support=support))
    return CodebookSet(M=M, K=K, N=N, J=J, indicator=INDICATOR_4x6.copy(),
                       codebooks=tuple(codebooks), generators=tuple(generators),
                       bit_matrix=B)


def _validate_codebook_set(cbs):
    """Check every load-time invariant, raising CodebookError with its name."""
    F = cbs.indicator
    if F.shape != (cbs.K, cbs.J) or not np.isin(F, (0, 1)).all():
        raise CodebookError("indicator matrix: must be K x J over {0,1}")
    col_w = F.sum(axis=0)
    if not np.all(col_w == cbs.N):
        raise CodebookError(
            f"indicator column weight: expected {cbs.N} everywhere, got {col_w.tolist()}")
    B = build_bit_matrix(cbs.M)
    for cb in cbs.codebooks:
        X = cb.matrix
        if X.shape != (cbs.K, cbs.M):
            raise CodebookError(f"codebook shape: user {cb.user} has {X.shape}")
        if not np.all(np.isfinite(X)):
            raise CodebookError(f"codebook finiteness: user {cb.user}")
        expected = tuple(np.flatnonzero(F[:, cb.user]).tolist())
        actual = tuple(np.flatnonzero(np.abs(X).sum(axis=1) > 0).tolist())
        if actual != expected:
            raise CodebookError(
                f"codebook support: user {cb.user} occupies rows {actual}, "
                f"indicator says {expected}")
        energy = float(np.mean(np.sum(np.abs(X) ** 2, axis=0)))
        if abs(energy - 1.0) > ENERGY_TOL:
            raise CodebookError(
                f"codeword energy: user {cb.user} has mean energy {energy!r}, expected 1")
        sym = float(np.linalg.norm(X + X[:, ::-1]))
        if sym > LINEARIZABLE_TOL_LOAD:
            raise CodebookError(
                f"codeword symmetry: user {cb.user} violates X[:,m] == -X[:,M-1-m] "
                f"by {sym:.3e}")
        compute_generator(X, B)   # raises if not linearizable


def save_codebook(cbs, path):
    """Write a codebook set as JSON with complex entries as [re, im] pairs."""
    doc = {
        "M": cbs.M, "K": cbs.K, "N": cbs.N, "J": cbs.J,
        "F": cbs.indicator.astype(int).tolist(),
        "codebooks": [
            [[[float(x.real), float(x.imag)] for x in row] for row in cb.matrix]
            for cb in cbs.codebooks
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_codebook(path):
    """Load and fully validate a codebook set from JSON."""
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise CodebookError(f"codebook file {path}: {e}") from e
    try:
        M, K, N, J = (int(doc[k]) for k in ("M", "K", "N", "J"))
        F = np.array(doc["F"], dtype=np.uint8)
        raw = doc["codebooks"]
    except (KeyError, TypeError, ValueError) as e:
        raise CodebookError(f"codebook file {path}: missing or malformed field ({e})") from e
    if len(raw) != J:
        raise CodebookError(f"codebook file {path}: expected {J} codebooks, got {len(raw)}")
    B = build_bit_matrix(M)
    codebooks = []
    generators = []
    for j, entry in enumerate(raw):
        X = np.array([[complex(re, im) for re, im in row] for row in entry])
        support = tuple(np.flatnonzero(np.abs(X).sum(axis=1) > 0).tolist())
        codebooks.append(Codebook(user=j, matrix=X, support=support))
    cbs = CodebookSet(M=M, K=K, N=N, J=J, indicator=F,
                      codebooks=tuple(codebooks), generators=(),
                      bit_matrix=B)
    _validate_codebook_set(cbs)
    generators = tuple(compute_generator(cb.matrix, B) for cb in codebooks)
    return CodebookSet(M=M, K=K, N=N, J=J, indicator=F,
                       codebooks=tuple(codebooks), generators=generators,
                       bit_matrix=B)


@dataclass(frozen=True)
class SparseGraphTopology:
    """Merged adjacency of bit VNs, likelihood FNs and parity CNs for one frame.

    The VN/FN structure repeats identically for each of the n_symbols SCMA
    symbols in a frame, so edges are enumerated once per symbol (FN-major)
    and indexed [symbol, edge] by the receiver. Parity adjacency spans the
    whole frame: each user runs the same parity-check code over its
    bits_per_user coded bits, already composed with the transmit-order
    permutation so the decoder can work purely in transmit positions.
    """

    indicator: np.ndarray
    J: int
    K: int
    N: int
    d_f: int
    M: int
    n_t: int
    n_r: int
    n_symbols: int
    bits_per_symbol: int
    bits_per_user: int

    # per-symbol edge structure, FN-major order
    edge_user: np.ndarray     # (E,)
    edge_ant: np.ndarray
    edge_bit: np.ndarray      # bit position within the symbol
    edge_res: np.ndarray      # resource index k
    edge_rx: np.ndarray       # receive antenna
    edge_vn: np.ndarray       # within-symbol VN id
    edge_fn: np.ndarray       # within-symbol FN id
    vn_edge_index: np.ndarray  # (vn_per_symbol, N * n_r) edge ids grouped by VN

    # framing: per-user coded-bit position l -> (symbol, antenna, bit slot)
    sym_of_bit: np.ndarray    # (bits_per_user,)
    slot_of_bit: np.ndarray   # within-symbol VN id of (user 0); add user offset

    # parity side (empty arrays when uncoded)
    cn_count: int
    parity_edge_cn: np.ndarray   # (E_H,) check index
    parity_edge_vn: np.ndarray   # (E_H,) coded-bit position in transmit order
    interleaver: np.ndarray      # transmit perm p: stream[l] = codeword[p[l]]

    @property
    def vn_per_symbol(self):
        return self.J * self.n_t * self.bits_per_symbol

    @property
    def fn_per_symbol(self):
        return self.n_r * self.K

    @property
    def edges_per_symbol(self):
        return int(self.edge_vn.size)

    @property
    def fn_degree(self):
        return self.d_f * self.n_t * self.bits_per_symbol

    @property
    def vn_fn_degree(self):
        return self.N * self.n_r

    def vn_slot(self, user, ant, bit):
        return (user * self.n_t + ant) * self.bits_per_symbol + bit

    def fn_neighbors_of_vn(self, vn):
        """V(n): FN ids adjacent to within-symbol VN n."""
        return np.sort(self.edge_fn[self.vn_edge_index[vn]])

    def vn_neighbors_of_fn(self, fn):
        """F(k, n_r): within-symbol VN ids adjacent to FN (k, n_r)."""
        return np.sort(self.edge_vn[self.edge_fn == fn])

    def cn_neighbors_of_bit(self, pos):
        """eta(n): parity-check indices adjacent to coded-bit position pos."""
        return np.sort(self.parity_edge_cn[self.parity_edge_vn == pos])

    def bit_neighbors_of_cn(self, cn):
        """phi(i): coded-bit positions adjacent to parity check cn."""
        return np.sort(self.parity_edge_vn[self.parity_edge_cn == cn])


def build_topology(indicator, n_t, n_r, M, parity=None, n_symbols=None,
                   interleaver=None):
    """Construct the merged graph for one frame.

    parity is a ParityCheckMatrix (or None for uncoded operation, in which
    case n_symbols must be given). Coded bits are written to antennas
    round-robin, then consecutive groups of log2(M) bits on each antenna
    stream form one SCMA symbol, so the code length must be divisible by
    n_t * log2(M). interleaver optionally permutes coded bits into transmit
    order (stream[l] = codeword[perm[l]]); identity when omitted.
    """
    F = np.asarray(indicator, dtype=np.uint8)
    if F.ndim != 2 or not np.isin(F, (0, 1)).all():
        raise ValueError("indicator must be a binary matrix")
    K, J = F.shape
    col_w = F.sum(axis=0)
    if not np.all(col_w == col_w[0]) or col_w[0] == 0:
        raise ValueError(f"indicator column weights must be constant, got {col_w.tolist()}")
    N = int(col_w[0])
    row_w = F.sum(axis=1)
    if not np.all(row_w == row_w[0]):
        raise ValueError(f"indicator row weights must be constant, got {row_w.tolist()}")
    d_f = int(row_w[0])
    n_bits = int(M).bit_length() - 1
    if M < 2 or (M & (M - 1)) != 0:
        raise ValueError(f"M must be a power of 2, got {M}")

    if parity is not None:
        bits_per_user = parity.n_cols
        if bits_per_user % (n_t * n_bits) != 0:
            raise ValueError(
                f"code length {bits_per_user} not divisible by n_t*log2(M) = {n_t * n_bits}")
        derived = bits_per_user // (n_t * n_bits)
        if n_symbols is not None and n_symbols != derived:
            raise ValueError(f"n_symbols {n_symbols} inconsistent with code length")
        n_symbols = derived
    else:
        if n_symbols is None:
            raise ValueError("uncoded topology needs an explicit n_symbols")
        bits_per_user = n_symbols * n_t * n_bits

    # per-symbol edges, FN-major
    e_user, e_ant, e_bit, e_res, e_rx = [], [], [], [], []
    for nr in range(n_r):
        for k in range(K):
            for j in np.flatnonzero(F[k, :]):
                for nt in range(n_t):
                    for m in range(n_bits):
                        e_rx.append(nr)
                        e_res.append(k)
                        e_user.append(int(j))
                        e_ant.append(nt)
                        e_bit.append(m)
    edge_user = np.array(e_user, dtype=np.int64)
    edge_ant = np.array(e_ant, dtype=np.int64)
    edge_bit = np.array(e_bit, dtype=np.int64)
    edge_res = np.array(e_res, dtype=np.int64)
    edge_rx = np.array(e_rx, dtype=np.int64)
    edge_vn = (edge_user * n_t + edge_ant) * n_bits + edge_bit
    edge_fn = edge_rx * K + edge_res
    order = np.argsort(edge_vn, kind="stable")
    vn_edge_index = order.reshape(J * n_t * n_bits, N * n_r)

    # framing of each user's coded bits
    l = np.arange(bits_per_user)
    ant_of_bit = l % n_t
    stream_pos = l // n_t
    sym_of_bit = stream_pos // n_bits
    pos_of_bit = stream_pos % n_bits
    slot_of_bit = ant_of_bit * n_bits + pos_of_bit   # user offset added by caller

    if interleaver is None:
        perm = np.arange(bits_per_user)
    else:
        perm = np.asarray(interleaver, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(bits_per_user)):
            raise ValueError("interleaver must be a permutation of coded-bit positions")

    if parity is not None:
        # parity adjacency in transmit positions: stream bit l carries codeword
        # bit perm[l], so check i touches l whenever perm[l] is in row i
        inv = np.empty(bits_per_user, dtype=np.int64)
        inv[perm] = np.arange(bits_per_user)
        cn_idx, vn_idx = [], []
        for i, cols in enumerate(parity.row_items):
            cn_idx.append(np.full(len(cols), i, dtype=np.int64))
            vn_idx.append(inv[cols])
        parity_edge_cn = np.concatenate(cn_idx) if cn_idx else np.zeros(0, dtype=np.int64)
        parity_edge_vn = np.concatenate(vn_idx) if vn_idx else np.zeros(0, dtype=np.int64)
        cn_count = parity.n_rows
    else:
        parity_edge_cn = np.zeros(0, dtype=np.int64)
        parity_edge_vn = np.zeros(0, dtype=np.int64)
        cn_count = 0

    return SparseGraphTopology(
        indicator=F, J=J, K=K, N=N, d_f=d_f, M=M, n_t=n_t, n_r=n_r,
        n_symbols=int(n_symbols), bits_per_symbol=n_bits, bits_per_user=bits_per_user,
        edge_user=edge_user, edge_ant=edge_ant, edge_bit=edge_bit,
        edge_res=edge_res, edge_rx=edge_rx, edge_vn=edge_vn, edge_fn=edge_fn,
        vn_edge_index=vn_edge_index,
        sym_of_bit=sym_of_bit, slot_of_bit=slot_of_bit,
        cn_count=cn_count, parity_edge_cn=parity_edge_cn,
        parity_edge_vn=parity_edge_vn, interleaver=perm)
