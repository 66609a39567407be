"""Message passing on the merged detection/decoding graph.

Bit-level variable nodes exchange Gaussian moments with the likelihood
function nodes (one per resource per receive antenna) and LLRs with the
parity checks of each user's code. Three schedules share the same kernels:

  ssg   every node class updates once per iteration on the merged graph
  jdd   a full detector pass then a full decoder pass per iteration, each
        seeing the other side's messages from the previous iteration
  idd   turbo style: blocks of detector-only iterations alternate with
        blocks of decoder-only iterations, the opposite side frozen

LLR convention everywhere: L = ln(Pr(b=-1)/Pr(b=+1)), bit 0 -> -1.
"""

from dataclasses import dataclass, field

import numpy as np

from . import ldpc

LLR_MAX = 30.0
XI_FLOOR = 1e-8
XI_CEIL = 1e8
H_EPS = 1e-12          # edge gains below this are treated as absent

SCHEMES = ("ssg", "jdd", "idd")
LLR_MODES = ("exact", "paper")


@dataclass(frozen=True)
class ReceiverConfig:
    scheme: str = "ssg"
    n_iter: int = 15
    n_out: int = 3
    n_epa_inner: int = 5
    n_ldpc_inner: int = 5
    damping: float = 0.3
    llr_mode: str = "exact"
    early_stop: bool = True
    xi_floor: float = XI_FLOOR
    xi_ceil: float = XI_CEIL

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.llr_mode not in LLR_MODES:
            raise ValueError(f"unknown llr mode {self.llr_mode!r}")
        if min(self.n_iter, self.n_out, self.n_epa_inner, self.n_ldpc_inner) < 1:
            raise ValueError("iteration budgets must be >= 1")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.xi_floor <= 0:
            raise ValueError("variance floor must be positive")


@dataclass
class DecodedFrame:
    info_bits: np.ndarray          # (J, L_b) hard 0/1 decisions
    coded_bits: np.ndarray         # (J, L_c) hard decisions in transmit order
    iterations: int
    converged: bool
    trace: np.ndarray              # per-iteration info-bit error counts (or None)
    fn_updates: int
    cn_updates: int
    fallback_events: int


def clamp_llr(L):
    return np.clip(L, -LLR_MAX, LLR_MAX)


def llr_to_moments(L, xi_floor=XI_FLOOR):
    """Bipolar posterior moments of a bit with LLR L: mu = -tanh(L/2), xi = 1 - mu^2."""
    mu = -np.tanh(np.asarray(L, dtype=float) / 2.0)
    xi = np.maximum(1.0 - mu * mu, xi_floor)
    return mu, xi


def fn_to_vn(mu_in, xi_in, y_edge, hbar, n0, fn_degree,
             xi_floor=XI_FLOOR, xi_ceil=XI_CEIL):
    """Gaussian FN -> VN messages by interference cancellation.

    Arrays are laid out FN-major on the last axis with constant FN degree,
    so per-FN sums are reshape sums. For each edge the remaining users'
    means form the residual interference Z and variances the power V:

        mu_out = (y - Z_excl) / h,   xi_out = (n0 + V_excl) / |h|^2

    Edges with |h| below 1e-12 get a vacuous message and are counted in
    the returned fallback tally.
    """
    mu_in = np.asarray(mu_in, dtype=complex)
    xi_in = np.asarray(xi_in, dtype=float)
    hbar = np.asarray(hbar, dtype=complex)
    shape = mu_in.shape
    grouped = shape[:-1] + (shape[-1] // fn_degree, fn_degree)

    hm = hbar * mu_in
    h2 = hbar.real ** 2 + hbar.imag ** 2
    h2xi = h2 * xi_in
    z_tot = hm.reshape(grouped).sum(axis=-1, keepdims=True)
    v_tot = h2xi.reshape(grouped).sum(axis=-1, keepdims=True)
    z_excl = (z_tot - hm.reshape(grouped)).reshape(shape)
    v_excl = (v_tot - h2xi.reshape(grouped)).reshape(shape)

    dead = h2 < H_EPS ** 2
    safe_h = np.where(dead, 1.0, hbar)
    mu_out = np.where(dead, 0.0, (np.asarray(y_edge) - z_excl) / safe_h)
    xi_out = np.where(dead, xi_ceil, (n0 + v_excl) / np.where(dead, 1.0, h2))
    xi_out = np.clip(xi_out, xi_floor, xi_ceil)
    return mu_out, xi_out, int(np.count_nonzero(dead))


def fn_to_vn_llr(mu, xi, mode="exact"):
    """Bit LLR of a Gaussian FN -> VN message.

    exact: the true Gaussian log-ratio -4 Re(mu) / xi. paper: the
    variance-free ratio ln(|1-mu|^2 / |1+mu|^2), kept for A/B comparison.
    """
    mu = np.asarray(mu, dtype=complex)
    if mode == "exact":
        L = -4.0 * mu.real / np.asarray(xi, dtype=float)
    elif mode == "paper":
        num = np.abs(1.0 - mu) ** 2
        den = np.abs(1.0 + mu) ** 2
        tiny = np.exp(-2.0 * LLR_MAX)
        L = np.log(np.maximum(num, tiny)) - np.log(np.maximum(den, tiny))
    else:
        raise ValueError(f"unknown llr mode {mode!r}")
    return clamp_llr(L)


def vn_to_fn(mu_post, xi_post, mu_f2v, xi_f2v, mu_prev, xi_prev,
             damping=0.0, xi_floor=XI_FLOOR, xi_ceil=XI_CEIL):
    """VN -> FN Gaussian by dividing the target FN's message out of the
    projected posterior, with damping in the mean and precision domains.

        1/xi_out = 1/xi_post - 1/xi_f2v
        mu_out   = xi_out * (mu_post/xi_post - mu_f2v/xi_f2v)

    A nonpositive or nonfinite resulting precision (a known degeneracy of
    the division) keeps the previous message on that edge; those events are
    counted and returned.
    """
    xi_post = np.asarray(xi_post, dtype=float)
    xi_f2v = np.asarray(xi_f2v, dtype=float)
    p_new = 1.0 / xi_post - 1.0 / xi_f2v
    ok = np.isfinite(p_new) & (p_new > 0)
    p_safe = np.where(ok, p_new, 1.0)
    mu_new = (np.asarray(mu_post) / xi_post - np.asarray(mu_f2v) / xi_f2v) / p_safe
    ok &= np.isfinite(mu_new.real) & np.isfinite(mu_new.imag)

    p_prev = 1.0 / np.asarray(xi_prev, dtype=float)
    p_mix = damping * p_prev + (1.0 - damping) * np.where(ok, p_new, p_prev)
    mu_mix = damping * np.asarray(mu_prev) + (1.0 - damping) * np.where(ok, mu_new, mu_prev)
    mu_out = np.where(ok, mu_mix, mu_prev)
    xi_out = np.where(ok, np.clip(1.0 / p_mix, xi_floor, xi_ceil),
                      np.asarray(xi_prev, dtype=float))
    return mu_out, xi_out, int(ok.size - np.count_nonzero(ok))


def vn_to_cn_message(fn_llrs, cn_llrs, target):
    """Reference scalar form: all FN LLRs plus the other checks' LLRs."""
    cn = np.asarray(cn_llrs, dtype=float)
    return float(np.clip(np.sum(fn_llrs) + cn.sum() - cn[target], -LLR_MAX, LLR_MAX))


def vn_gather_message(fn_llrs, cn_llrs, target_fn):
    """Reference scalar form: all CN LLRs plus the other FNs' LLRs."""
    fn = np.asarray(fn_llrs, dtype=float)
    return float(np.clip(fn.sum() - fn[target_fn] + np.sum(cn_llrs), -LLR_MAX, LLR_MAX))


def hard_decision(agg_llr):
    """L >= 0 -> bit 0 (b = -1); L < 0 -> bit 1. Ties go to bit 0."""
    return (np.asarray(agg_llr) < 0).astype(np.uint8)


class FrameDecoder:
    """Receiver for one frame layout: precomputes index maps from a topology
    and decodes received symbol blocks under any of the three schedules."""

    def __init__(self, topology, generators, info_cols=None):
        t = self.topo = topology
        self.generators = tuple(generators)
        self.info_cols = None if info_cols is None else np.asarray(info_cols)
        B = t.bits_per_symbol

        G_all = np.stack([g.matrix for g in self.generators])      # (J, K, B)
        self.g_edge = G_all[t.edge_user, t.edge_res, t.edge_bit]   # (E,)

        # stream position of each (symbol, edge) and of each (user, position)
        s_idx = np.arange(t.n_symbols)[:, None]
        self.l_edge = (s_idx * B + t.edge_bit[None, :]) * t.n_t + t.edge_ant[None, :]
        self.vn_pos = (np.arange(t.J)[:, None] * t.n_t * B + t.slot_of_bit[None, :])

        # per-user parity structure shared by all users
        self.has_code = t.cn_count > 0
        self.parity_vn = t.parity_edge_vn
        self.parity_cn = t.parity_edge_cn

    def edge_gains(self, h):
        """Per-edge scalar coefficients of diag(h) G, shape (n_symbols, E)."""
        t = self.topo
        return h[:, t.edge_user, t.edge_rx, t.edge_ant, t.edge_res] * self.g_edge[None, :]

    def edge_observations(self, y):
        t = self.topo
        return y[:, t.edge_rx, t.edge_res]

    # -- vectorized per-frame kernels ------------------------------------

    def _fn_totals(self, L_f2v):
        """Sum of FN LLRs at every (symbol, VN)."""
        return L_f2v[:, self.topo.vn_edge_index].sum(axis=2)

    def _fn_totals_at_bits(self, T):
        """FN LLR totals reindexed per (user, stream position)."""
        return T[self.topo.sym_of_bit[None, :], self.vn_pos]

    def _cn_totals(self, L_c2v):
        """Sum of CN LLRs at every (user, stream position)."""
        t = self.topo
        C = np.zeros((t.J, t.bits_per_user))
        if self.has_code:
            for j in range(t.J):
                C[j] = np.bincount(self.parity_vn, weights=L_c2v[j],
                                   minlength=t.bits_per_user)
        return C

    def _vn_to_cn(self, Tf, C, L_c2v):
        """All VN -> CN LLRs: FN totals plus the extrinsic CN sum."""
        ev = self.parity_vn
        return clamp_llr(Tf[:, ev] + C[:, ev] - L_c2v)

    def _cn_to_vn(self, L_v2c):
        """All CN -> VN LLRs via the phi-domain total-minus-own rule."""
        t = self.topo
        ec = self.parity_cn
        out = np.empty_like(L_v2c)
        for j in range(t.J):
            L = L_v2c[j]
            p = ldpc.phi(L)
            neg = (L < 0)
            p_tot = np.bincount(ec, weights=p, minlength=t.cn_count)
            n_neg = np.bincount(ec, weights=neg.astype(float), minlength=t.cn_count)
            cn_sign = 1.0 - 2.0 * (n_neg.astype(np.int64) & 1)
            own_sign = np.where(neg, -1.0, 1.0)
            mag = ldpc.phi(p_tot[ec] - p)
            out[j] = cn_sign[ec] * own_sign * np.minimum(mag, LLR_MAX)
        return out

    def _posterior_moments(self, T, C, cfg):
        """Full per-VN belief (all FNs, all CNs) projected to moments and
        broadcast per FN edge; vn_to_fn then divides the target's own
        message out of this posterior."""
        t = self.topo
        c_edge = C[t.edge_user[None, :], self.l_edge]
        L = clamp_llr(T[:, t.edge_vn] + c_edge)
        return llr_to_moments(L, cfg.xi_floor)

    def _aggregate(self, T, C):
        return clamp_llr(self._fn_totals_at_bits(T) + C)

    def _syndromes_pass(self, stream_hat):
        """True when every user's hard bits satisfy all parity checks."""
        t = self.topo
        for j in range(t.J):
            s = np.bincount(self.parity_cn, weights=stream_hat[j, self.parity_vn],
                            minlength=t.cn_count)
            if (s.astype(np.int64) & 1).any():
                return False
        return True

    def _extract(self, stream_hat):
        """Hard coded bits (transmit order) -> info bits via the interleaver."""
        t = self.topo
        codeword = np.empty_like(stream_hat)
        codeword[:, t.interleaver] = stream_hat
        if self.info_cols is None:
            return codeword
        return codeword[:, self.info_cols]

    # -- schedules --------------------------------------------------------

    def decode(self, y, h, n0, cfg, true_info=None):
        """Run the configured schedule over one frame.

        y: (n_symbols, n_r, K) observations; h: (n_symbols, J, n_r, n_t, K)
        gains; true_info optionally enables the per-iteration error trace.
        """
        t = self.topo
        hbar = self.edge_gains(h)
        y_edge = self.edge_observations(y)
        S, E = hbar.shape

        mu_v2f = np.zeros((S, E), dtype=complex)
        xi_v2f = np.ones((S, E))
        mu_f2v = np.zeros((S, E), dtype=complex)
        xi_f2v = np.full((S, E), cfg.xi_ceil)
        L_f2v = np.zeros((S, E))
        n_pedges = self.parity_vn.size
        L_v2c = np.zeros((t.J, n_pedges))
        L_c2v = np.zeros((t.J, n_pedges))

        counts = {"fn": 0, "cn": 0, "fb": 0}
        trace = [] if true_info is not None else None
        state = dict(mu_v2f=mu_v2f, xi_v2f=xi_v2f, mu_f2v=mu_f2v, xi_f2v=xi_f2v,
                     L_f2v=L_f2v, L_v2c=L_v2c, L_c2v=L_c2v)

        def fn_pass():
            m, x, k = fn_to_vn(state["mu_v2f"], state["xi_v2f"], y_edge, hbar,
                               n0, t.fn_degree, cfg.xi_floor, cfg.xi_ceil)
            state["mu_f2v"], state["xi_f2v"] = m, x
            state["L_f2v"] = fn_to_vn_llr(m, x, cfg.llr_mode)
            counts["fn"] += S * E
            counts["fb"] += k

        def epa_vn_pass(C):
            T = self._fn_totals(state["L_f2v"])
            mu_p, xi_p = self._posterior_moments(T, C, cfg)
            m, x, k = vn_to_fn(mu_p, xi_p, state["mu_f2v"], state["xi_f2v"],
                               state["mu_v2f"], state["xi_v2f"],
                               cfg.damping, cfg.xi_floor, cfg.xi_ceil)
            state["mu_v2f"], state["xi_v2f"] = m, x
            counts["fb"] += k

        def ldpc_pass(Tf):
            C = self._cn_totals(state["L_c2v"])
            state["L_v2c"] = self._vn_to_cn(Tf, C, state["L_c2v"])
            state["L_c2v"] = self._cn_to_vn(state["L_v2c"])
            counts["cn"] += state["L_c2v"].size

        def snapshot():
            T = self._fn_totals(state["L_f2v"])
            C = self._cn_totals(state["L_c2v"])
            agg = self._aggregate(T, C)
            stream_hat = hard_decision(agg)
            if trace is not None:
                info = self._extract(stream_hat)
                trace.append(int(np.count_nonzero(info != true_info)))
            return stream_hat

        iters = 0
        converged = False
        stream_hat = None

        if cfg.scheme == "ssg":
            for _ in range(cfg.n_iter):
                fn_pass()
                if self.has_code:
                    Tf = self._fn_totals_at_bits(self._fn_totals(state["L_f2v"]))
                    ldpc_pass(Tf)
                epa_vn_pass(self._cn_totals(state["L_c2v"]))
                iters += 1
                stream_hat = snapshot()
                if cfg.early_stop and self.has_code and self._syndromes_pass(stream_hat):
                    converged = True
                    break
        elif cfg.scheme == "jdd":
            for _ in range(cfg.n_iter):
                C_prev = self._cn_totals(state["L_c2v"])
                fn_pass()
                epa_vn_pass(C_prev)
                if self.has_code:
                    Tf = self._fn_totals_at_bits(self._fn_totals(state["L_f2v"]))
                    ldpc_pass(Tf)
                iters += 1
                stream_hat = snapshot()
                if cfg.early_stop and self.has_code and self._syndromes_pass(stream_hat):
                    converged = True
                    break
        else:
            # turbo baseline: all messages persist across outer loops, only
            # the opposite side's totals are frozen during each inner block
            for _ in range(cfg.n_out):
                C_frozen = self._cn_totals(state["L_c2v"])
                for _ in range(cfg.n_epa_inner):
                    fn_pass()
                    epa_vn_pass(C_frozen)
                    iters += 1
                    stream_hat = snapshot()
                if self.has_code:
                    Tf = self._fn_totals_at_bits(self._fn_totals(state["L_f2v"]))
                    for _ in range(cfg.n_ldpc_inner):
                        ldpc_pass(Tf)
                        iters += 1
                        stream_hat = snapshot()
                if cfg.early_stop and self.has_code and self._syndromes_pass(stream_hat):
                    converged = True
                    break

        if stream_hat is None:
            stream_hat = snapshot()
        info = self._extract(stream_hat)
        return DecodedFrame(
            info_bits=info, coded_bits=stream_hat, iterations=iters,
            converged=converged,
            trace=None if trace is None else np.array(trace, dtype=np.int64),
            fn_updates=counts["fn"], cn_updates=counts["cn"],
            fallback_events=counts["fb"])


def map_oracle(y, h, n0, topology, generators):
    """Exact bit LLRs by enumerating every transmit hypothesis of one symbol.

    y: (..., n_r, K); h: (..., J, n_r, n_t, K). Returns (..., V) LLRs in VN
    slot order, V = J * n_t * log2(M), computed from the joint likelihood
    exp(-||y - sum Hbar b||^2 / n0) summed over all 2^V hypotheses.
    """
    t = topology
    V = t.J * t.n_t * t.bits_per_symbol
    if V > 16:
        raise ValueError(f"enumeration bound exceeded: {V} bits per symbol")
    n_hyp = 1 << V
    combos = np.arange(n_hyp)
    slots = np.arange(V)
    bits_table = (2 * ((combos[None, :] >> slots[:, None]) & 1) - 1).astype(float)

    h = np.asarray(h)
    G_all = np.stack([g.matrix for g in generators])                 # (J, K, B)
    hbar = h[..., None] * G_all[:, None, None, :, :]                 # (..., J, nr, nt, K, B)
    # reorder to (..., nr, K, V) with slot order (j * n_t + nt) * B + m
    hbar = np.moveaxis(hbar, (-4, -2), (-5, -4))                     # (..., nr, K, j, nt, B)
    wide = hbar.reshape(hbar.shape[:-3] + (V,))
    signal = wide @ bits_table                                       # (..., nr, K, n_hyp)

    resid = np.abs(np.asarray(y)[..., None] - signal) ** 2
    logw = -resid.sum(axis=(-3, -2)) / n0                            # (..., n_hyp)

    def logsumexp(x, mask):
        xm = np.where(mask, x, -np.inf)
        m = xm.max(axis=-1, keepdims=True)
        m = np.where(np.isfinite(m), m, 0.0)
        return (m + np.log(np.exp(xm - m).sum(axis=-1, keepdims=True)))[..., 0]

    out = np.empty(logw.shape[:-1] + (V,))
    for v in range(V):
        pos = ((combos >> v) & 1).astype(bool)
        out[..., v] = logsumexp(logw, ~pos) - logsumexp(logw, pos)
    return out
