"""Binary LDPC codes: alist IO, GF(2) encoding, PEG construction, CN kernels.

LLRs follow the convention L = ln(Pr(bit=0) / Pr(bit=1)) throughout, under
which the exact check-node rule keeps its usual tanh/phi form.
"""

from dataclasses import dataclass
from importlib import resources

import numpy as np

PHI_CLAMP_MIN = 1e-12
PHI_CLAMP_MAX = 30.0


class AlistFormatError(ValueError):
    """Raised when a parity-check file cannot be parsed or is inconsistent."""


@dataclass(frozen=True)
class ParityCheckMatrix:
    """Sparse binary parity-check matrix stored as per-row/per-column index lists."""

    n_rows: int
    n_cols: int
    row_items: tuple    # n_rows arrays of column indices, 0-based ascending
    col_items: tuple    # n_cols arrays of row indices

    @property
    def n_edges(self):
        return int(sum(len(r) for r in self.row_items))

    @property
    def row_weights(self):
        return np.array([len(r) for r in self.row_items])

    @property
    def col_weights(self):
        return np.array([len(c) for c in self.col_items])

    def to_dense(self):
        H = np.zeros((self.n_rows, self.n_cols), dtype=np.uint8)
        for i, cols in enumerate(self.row_items):
            H[i, cols] = 1
        return H

    @classmethod
    def from_dense(cls, H):
        H = np.asarray(H)
        if not np.isin(H, (0, 1)).all():
            raise ValueError("parity-check matrix must be binary")
        rows = tuple(np.flatnonzero(H[i]).astype(np.int64) for i in range(H.shape[0]))
        cols = tuple(np.flatnonzero(H[:, j]).astype(np.int64) for j in range(H.shape[1]))
        return cls(n_rows=H.shape[0], n_cols=H.shape[1], row_items=rows, col_items=cols)


def load_alist(path):
    """Parse an alist file (n_cols n_rows header, 1-based index lists).

    Accepts both zero-padded and unpadded neighbor lists. Cross-checks the
    row lists against the column lists and the declared weights.
    """
    with open(path) as f:
        tokens_by_line = [line.split() for line in f if line.strip()]
    try:
        n_cols, n_rows = (int(t) for t in tokens_by_line[0][:2])
        max_col_w, max_row_w = (int(t) for t in tokens_by_line[1][:2])
        col_w = [int(t) for t in tokens_by_line[2]]
        row_w = [int(t) for t in tokens_by_line[3]]
    except (IndexError, ValueError) as e:
        raise AlistFormatError(f"{path}: malformed header ({e})") from e
    if len(col_w) != n_cols or len(row_w) != n_rows:
        raise AlistFormatError(f"{path}: weight list lengths do not match dimensions")
    if max(col_w, default=0) > max_col_w or max(row_w, default=0) > max_row_w:
        raise AlistFormatError(f"{path}: weight exceeds declared maximum")
    body = tokens_by_line[4:]
    if len(body) < n_cols + n_rows:
        raise AlistFormatError(f"{path}: expected {n_cols + n_rows} index lines, "
                               f"got {len(body)}")

    def parse_list(tokens, weight, limit, what):
        vals = [int(t) for t in tokens]
        entries = [v for v in vals if v != 0]
        if len(entries) != weight:
            raise AlistFormatError(
                f"{path}: {what} lists {len(entries)} entries, declared weight {weight}")
        if any(not 1 <= v <= limit for v in entries):
            raise AlistFormatError(f"{path}: {what} has index out of range")
        return np.array(sorted(v - 1 for v in entries), dtype=np.int64)

    col_items = tuple(parse_list(body[j], col_w[j], n_rows, f"column {j + 1}")
                      for j in range(n_cols))
    row_items = tuple(parse_list(body[n_cols + i], row_w[i], n_cols, f"row {i + 1}")
                      for i in range(n_rows))

    # both halves must describe the same matrix
    from_cols = set()
    for j, rows in enumerate(col_items):
        from_cols.update((int(i), j) for i in rows)
    from_rows = set()
    for i, cols in enumerate(row_items):
        from_rows.update((i, int(j)) for j in cols)
    if from_cols != from_rows:
        raise AlistFormatError(f"{path}: row and column lists disagree")

    return ParityCheckMatrix(n_rows=n_rows, n_cols=n_cols,
                             row_items=row_items, col_items=col_items)


def save_alist(H, path):
    """Write a ParityCheckMatrix in alist format with zero-padded lists."""
    max_col_w = int(H.col_weights.max())
    max_row_w = int(H.row_weights.max())
    lines = [f"{H.n_cols} {H.n_rows}", f"{max_col_w} {max_row_w}",
             " ".join(str(len(c)) for c in H.col_items),
             " ".join(str(len(r)) for r in H.row_items)]
    for c in H.col_items:
        padded = [str(v + 1) for v in c] + ["0"] * (max_col_w - len(c))
        lines.append(" ".join(padded))
    for r in H.row_items:
        padded = [str(v + 1) for v in r] + ["0"] * (max_row_w - len(r))
        lines.append(" ".join(padded))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class LdpcEncoder:
    """Systematic GF(2) encoder derived from row-reducing H.

    Information bits occupy free_cols of the codeword; pivot_cols hold the
    parity bits c[pivot] = A @ u mod 2. n_info = n_cols - rank(H), so a
    rank-deficient H simply yields more information positions.
    """

    n_cols: int
    n_info: int
    pivot_cols: np.ndarray
    free_cols: np.ndarray
    A: np.ndarray            # (rank, n_info) uint8

    @property
    def rate(self):
        return self.n_info / self.n_cols


def make_encoder(H):
    """Row reduce H over GF(2) and build the systematic encoder."""
    R = H.to_dense().astype(np.uint8)
    n_rows, n_cols = R.shape
    pivots = []
    r = 0
    for j in range(n_cols):
        if r == n_rows:
            break
        hit = np.flatnonzero(R[r:, j])
        if hit.size == 0:
            continue
        k = r + hit[0]
        if k != r:
            R[[r, k]] = R[[k, r]]
        # clear column j everywhere else
        others = np.flatnonzero(R[:, j])
        others = others[others != r]
        R[others] ^= R[r]
        pivots.append(j)
        r += 1
    pivot_cols = np.array(pivots, dtype=np.int64)
    free_cols = np.setdiff1d(np.arange(n_cols), pivot_cols)
    A = R[:len(pivots)][:, free_cols].copy()
    return LdpcEncoder(n_cols=n_cols, n_info=len(free_cols),
                       pivot_cols=pivot_cols, free_cols=free_cols, A=A)


def ldpc_encode(encoder, info_bits):
    """Codeword (0/1, length n_cols) carrying info_bits in the free positions."""
    u = np.asarray(info_bits, dtype=np.uint8)
    if u.shape != (encoder.n_info,):
        raise ValueError(f"expected {encoder.n_info} information bits, got {u.shape}")
    if not np.isin(u, (0, 1)).all():
        raise ValueError("information bits must be 0/1")
    c = np.zeros(encoder.n_cols, dtype=np.uint8)
    c[encoder.free_cols] = u
    c[encoder.pivot_cols] = (encoder.A @ u) % 2
    return c


def extract_info(encoder, codeword):
    """Information bits back out of a codeword's free positions."""
    return np.asarray(codeword, dtype=np.uint8)[encoder.free_cols]


def syndrome_check(H, bits):
    """(all_satisfied, unsatisfied_count) for hard bits 0/1."""
    c = np.asarray(bits, dtype=np.uint8)
    bad = 0
    for cols in H.row_items:
        if int(c[cols].sum()) & 1:
            bad += 1
    return bad == 0, bad


def phi(x):
    """phi(x) = -ln tanh(x/2), self-inverse, with |x| clamped to [1e-12, 30]."""
    x = np.clip(np.abs(np.asarray(x, dtype=float)), PHI_CLAMP_MIN, PHI_CLAMP_MAX)
    return -np.log(np.tanh(x / 2.0))


def cn_update(llrs):
    """Box-plus of the given LLRs: the extrinsic output of a parity check
    toward the one neighbor whose own message is already excluded.

    Computed as sign(prod signs) * phi(sum phi(|L|)), which equals
    2 atanh(prod tanh(L/2)) up to the clamping of phi's domain.
    """
    L = np.asarray(llrs, dtype=float)
    if L.size == 0:
        raise ValueError("check-node update needs at least one incoming LLR")
    sgn = np.where(L < 0, -1.0, 1.0).prod()
    mag = phi(np.sum(phi(L)))
    return float(sgn * min(mag, PHI_CLAMP_MAX))


def cn_extrinsic(llrs):
    """Per-neighbor extrinsic outputs of one check node, total-minus-own."""
    L = np.asarray(llrs, dtype=float)
    sgn = np.where(L < 0, -1.0, 1.0)
    p = phi(L)
    mag = phi(p.sum() - p)
    return sgn.prod() * sgn * np.minimum(mag, PHI_CLAMP_MAX)


def _dense(H):
    return H if isinstance(H, np.ndarray) else H.to_dense()


def has_four_cycle(H):
    """True when two checks share more than one variable (girth 4)."""
    D = _dense(H).astype(np.int64)
    overlap = D @ D.T
    np.fill_diagonal(overlap, 0)
    return bool((overlap > 1).any())


def gf2_rank(H):
    R = _dense(H).astype(np.uint8).copy()
    n_rows, n_cols = R.shape
    r = 0
    for j in range(n_cols):
        if r == n_rows:
            break
        hit = np.flatnonzero(R[r:, j])
        if hit.size == 0:
            continue
        k = r + hit[0]
        if k != r:
            R[[r, k]] = R[[k, r]]
        others = np.flatnonzero(R[:, j])
        others = others[others != r]
        R[others] ^= R[r]
        r += 1
    return r


def peg_construct(n_cols, n_rows, col_weight, rng):
    """Progressive edge growth for a column-regular parity-check matrix.

    For each variable node, the first edge goes to a minimum-degree check;
    later edges go to a minimum-degree check among those farthest from (or
    unreachable from) the variable in the graph built so far, which keeps
    local cycles as long as possible. Ties break uniformly via rng.
    """
    check_nbrs = [[] for _ in range(n_rows)]   # check -> variables
    var_nbrs = [[] for _ in range(n_cols)]     # variable -> checks
    degree = np.zeros(n_rows, dtype=np.int64)

    def pick(cands):
        d = degree[cands]
        best = cands[d == d.min()]
        return int(best[rng.integers(best.size)])

    for v in range(n_cols):
        for t in range(col_weight):
            if t == 0:
                c = pick(np.arange(n_rows))
            else:
                # BFS over the current graph from v
                seen_c = np.zeros(n_rows, dtype=bool)
                seen_v = np.zeros(n_cols, dtype=bool)
                seen_v[v] = True
                frontier = list(var_nbrs[v])
                for ci in frontier:
                    seen_c[ci] = True
                last_layer = np.array(frontier, dtype=np.int64)
                while True:
                    nxt_v = []
                    for ci in frontier:
                        for vi in check_nbrs[ci]:
                            if not seen_v[vi]:
                                seen_v[vi] = True
                                nxt_v.append(vi)
                    frontier = []
                    for vi in nxt_v:
                        for ci in var_nbrs[vi]:
                            if not seen_c[ci]:
                                seen_c[ci] = True
                                frontier.append(ci)
                    if not frontier:
                        break
                    last_layer = np.array(frontier, dtype=np.int64)
                unreached = np.flatnonzero(~seen_c)
                c = pick(unreached if unreached.size else last_layer)
            check_nbrs[c].append(v)
            var_nbrs[v].append(c)
            degree[c] += 1

    rows = tuple(np.array(sorted(nb), dtype=np.int64) for nb in check_nbrs)
    cols = tuple(np.array(sorted(nb), dtype=np.int64) for nb in var_nbrs)
    return ParityCheckMatrix(n_rows=n_rows, n_cols=n_cols,
                             row_items=rows, col_items=cols)


def default_code():
    """The packaged length-400, 200-check parity matrix (girth >= 6, full rank)."""
    ref = resources.files("scmasim.data").joinpath("ldpc_400_200.alist")
    with resources.as_file(ref) as path:
        return load_alist(path)
