"""Monte Carlo driver: deterministic per-frame streams, sweeps, traces, counters.

Every frame gets its own RNG stream spawned from (master seed, frame index),
so results never depend on worker count, chunking, or which Eb/N0 point or
scheme consumes the frame. All schemes of a paired run see identical
information bits, channel draws, and (unit, later scaled) noise draws.
"""

import dataclasses
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import channel, codec, ldpc
from .receiver import FrameDecoder, ReceiverConfig

CSV_COLUMNS = ("scheme", "ebn0_db", "frames", "bit_errors", "frame_errors",
               "ber", "fer", "avg_iters", "fallback_events", "fn_updates",
               "cn_updates", "wall_ms")
CHUNK_FRAMES = 32


@dataclass(frozen=True)
class SimConfig:
    codebook: str = "default"
    ldpc: str = "default"          # alist path, "default", or "none" (uncoded)
    scheme: str = "ssg"            # ssg | jdd | idd | all
    n_t: int = 1
    n_r: int = 2
    ebn0_db: tuple = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    n_iter: int = 15
    n_out: int = 3
    n_epa_inner: int = 5
    n_ldpc_inner: int = 5
    damping: float = 0.3
    llr_mode: str = "exact"
    early_stop: bool = True
    block_fading: int = 1
    seed: int = 1
    max_frames: int = 2000
    target_errors: int = 100
    workers: int = 1
    n_symbols: int = 100           # frame length in SCMA symbols, uncoded mode only
    out: str = None
    timings: bool = False

    def __post_init__(self):
        if self.scheme not in ("ssg", "jdd", "idd", "all"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if len(self.ebn0_db) == 0:
            raise ValueError("at least one Eb/N0 sweep point is required")
        if self.target_errors < 1:
            raise ValueError("target frame errors must be >= 1")
        if self.max_frames < 1:
            raise ValueError("max frames must be >= 1")
        if self.workers < 1 or self.block_fading < 1:
            raise ValueError("workers and block-fading length must be >= 1")
        if min(self.n_t, self.n_r, self.n_symbols) < 1:
            raise ValueError("dimensions must be >= 1")
        self.receiver_config(self.schemes[0])   # damping/llr/iteration checks

    @property
    def schemes(self):
        return ("ssg", "jdd", "idd") if self.scheme == "all" else (self.scheme,)

    def receiver_config(self, scheme, early_stop=None):
        return ReceiverConfig(
            scheme=scheme, n_iter=self.n_iter, n_out=self.n_out,
            n_epa_inner=self.n_epa_inner, n_ldpc_inner=self.n_ldpc_inner,
            damping=self.damping, llr_mode=self.llr_mode,
            early_stop=self.early_stop if early_stop is None else early_stop)


@dataclass
class SweepResult:
    scheme: str
    ebn0_db: float
    frames: int
    bit_errors: int
    frame_errors: int
    ber: float
    fer: float
    avg_iters: float
    fallback_events: int
    fn_updates: int
    cn_updates: int
    wall_ms: float


class _Context:
    """Everything a worker needs to simulate frames, built once per process."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.cbs = (codec.default_codebook() if cfg.codebook == "default"
                    else codec.load_codebook(cfg.codebook))
        J, K, B = self.cbs.J, self.cbs.K, self.cbs.bits_per_symbol

        if cfg.ldpc == "none":
            self.H = None
            self.encoder = None
            self.n_symbols = cfg.n_symbols
            self.bits_per_user = cfg.n_symbols * cfg.n_t * B
            self.n_info = self.bits_per_user
        else:
            self.H = (ldpc.default_code() if cfg.ldpc == "default"
                      else ldpc.load_alist(cfg.ldpc))
            self.encoder = ldpc.make_encoder(self.H)
            self.bits_per_user = self.H.n_cols
            self.n_info = self.encoder.n_info
            self.n_symbols = self.bits_per_user // (cfg.n_t * B)

        self.rate = self.n_info / self.bits_per_user
        self.G_all = np.stack([g.matrix for g in self.cbs.generators])

        # idd transmits through a fixed pseudorandom interleaver; ssg/jdd do not
        perm_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed,
                                                                spawn_key=(0xA11CE,)))
        self.perms = {}
        self.decoders = {}
        for scheme in cfg.schemes:
            perm = (perm_rng.permutation(self.bits_per_user)
                    if scheme == "idd" else np.arange(self.bits_per_user))
            topo = codec.build_topology(self.cbs.indicator, cfg.n_t, cfg.n_r,
                                        self.cbs.M, parity=self.H,
                                        n_symbols=self.n_symbols, interleaver=perm)
            info_cols = None if self.encoder is None else self.encoder.free_cols
            self.perms[scheme] = perm
            self.decoders[scheme] = FrameDecoder(topo, self.cbs.generators, info_cols)
        topo0 = self.decoders[cfg.schemes[0]].topo
        self.epa_per_pass = self.n_symbols * topo0.edges_per_symbol
        self.ldpc_per_pass = J * topo0.parity_edge_vn.size

        S, n_t = self.n_symbols, cfg.n_t
        s = np.arange(S)[:, None, None]
        nt = np.arange(n_t)[None, :, None]
        m = np.arange(B)[None, None, :]
        self.l_index = (s * B + m) * n_t + nt            # (S, n_t, B)
        self.n_blocks = math.ceil(S / cfg.block_fading)

    def simulate_frame(self, frame_idx, n0, rcfgs, want_trace):
        """Encode, fade, add noise, and decode one multiuser frame per scheme."""
        cfg = self.cfg
        J, K, B = self.cbs.J, self.cbs.K, self.cbs.bits_per_symbol
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed,
                                                           spawn_key=(frame_idx,)))
        info = rng.integers(0, 2, size=(J, self.n_info)).astype(np.uint8)
        h = channel.sample_channel(rng, J, cfg.n_t, cfg.n_r, K, count=self.n_blocks)
        h = np.repeat(h, cfg.block_fading, axis=0)[:self.n_symbols]
        z = channel.sample_noise(rng, (self.n_symbols, cfg.n_r, K), 1.0)

        if self.encoder is None:
            codewords = info
        else:
            codewords = np.stack([ldpc.ldpc_encode(self.encoder, info[j])
                                  for j in range(J)])

        out = {}
        y_cache = {}
        for scheme, rcfg in rcfgs.items():
            perm = self.perms[scheme]
            key = perm.tobytes()
            if key not in y_cache:
                streams = codewords[:, perm]
                b = (2.0 * streams - 1.0)[:, self.l_index]    # (J, S, n_t, B)
                x = np.einsum("jkm,jsnm->sjnk", self.G_all, b)
                y_clean = np.einsum("sjrnk,sjnk->srk", h, x)
                y_cache[key] = y_clean
            y = y_cache[key] + np.sqrt(n0) * z
            dec = self.decoders[scheme].decode(y, h, n0, rcfg, true_info=info)
            bit_err = int(np.count_nonzero(dec.info_bits != info))
            out[scheme] = (bit_err, bit_err > 0, dec.iterations, dec.fallback_events,
                           dec.fn_updates, dec.cn_updates,
                           dec.trace if want_trace else None)
        return out


_CTX = None


def _ctx_key(cfg):
    """Fields the simulation context actually depends on."""
    return (cfg.codebook, cfg.ldpc, cfg.scheme, cfg.n_t, cfg.n_r,
            cfg.block_fading, cfg.seed, cfg.n_symbols)


def _get_context(cfg):
    global _CTX
    if _CTX is None or _ctx_key(_CTX.cfg) != _ctx_key(cfg):
        _CTX = _Context(cfg)
    return _CTX


def _init_worker(cfg):
    _get_context(cfg)


def _run_chunk(args):
    cfg, start, count, n0, early_stop, want_trace = args
    ctx = _get_context(cfg)
    rcfgs = {s: cfg.receiver_config(s, early_stop) for s in cfg.schemes}
    return [ctx.simulate_frame(start + i, n0, rcfgs, want_trace)
            for i in range(count)]


def _iter_frames(cfg, n0, early_stop, want_trace):
    """Yield per-frame results in frame-index order, on 1 or more workers."""
    chunks = [(cfg, s, min(CHUNK_FRAMES, cfg.max_frames - s), n0, early_stop,
               want_trace) for s in range(0, cfg.max_frames, CHUNK_FRAMES)]
    if cfg.workers == 1:
        for ch in chunks:
            yield from _run_chunk(ch)
        return
    with ProcessPoolExecutor(max_workers=cfg.workers, initializer=_init_worker,
                             initargs=(cfg,)) as pool:
        futures = [pool.submit(_run_chunk, ch) for ch in chunks]
        try:
            for fut in futures:
                yield from fut.result()
        finally:
            for fut in futures:
                fut.cancel()


def run_point(cfg, ebn0_db, early_stop=None, want_trace=False, collect_traces=None):
    """Simulate one sweep point for every configured scheme.

    Frames accrue until every scheme has >= target_errors erroneous frames
    or max_frames is reached, evaluated in frame-index order so the stop
    decision is scheduling-independent. Returns one SweepResult per scheme.
    """
    ctx = _get_context(cfg)
    n0 = channel.calibrate_noise(ebn0_db, ctx.rate, ctx.cbs.M)
    schemes = cfg.schemes
    tally = {s: dict(bits=0, frames=0, ferr=0, iters=0, fb=0, fn=0, cn=0)
             for s in schemes}
    t0 = time.perf_counter()
    for frame in _iter_frames(cfg, n0, early_stop, want_trace):
        for s in schemes:
            bit_err, ferr, iters, fb, fn, cn, trace = frame[s]
            rec = tally[s]
            rec["bits"] += bit_err
            rec["ferr"] += int(ferr)
            rec["frames"] += 1
            rec["iters"] += iters
            rec["fb"] += fb
            rec["fn"] += fn
            rec["cn"] += cn
            if collect_traces is not None and trace is not None:
                collect_traces.setdefault(s, []).append(trace)
        if min(tally[s]["ferr"] for s in schemes) >= cfg.target_errors:
            break
    wall_ms = (time.perf_counter() - t0) * 1e3

    total_info = ctx.cbs.J * ctx.n_info
    rows = []
    for s in schemes:
        rec = tally[s]
        n = rec["frames"]
        rows.append(SweepResult(
            scheme=s, ebn0_db=float(ebn0_db), frames=n,
            bit_errors=rec["bits"], frame_errors=rec["ferr"],
            ber=rec["bits"] / (n * total_info), fer=rec["ferr"] / n,
            avg_iters=rec["iters"] / n, fallback_events=rec["fb"],
            fn_updates=rec["fn"], cn_updates=rec["cn"], wall_ms=wall_ms))
    return rows


def run_sweep(cfg, log=None):
    """All (scheme, Eb/N0) rows, scheme-major, plus reliability notes."""
    rows_by_scheme = {s: [] for s in cfg.schemes}
    for ebn0 in cfg.ebn0_db:
        for row in run_point(cfg, ebn0):
            rows_by_scheme[row.scheme].append(row)
            if log is not None:
                ci = _fer_ci(row)
                note = "" if row.frame_errors >= cfg.target_errors else "  [unreliable]"
                print(f"{row.scheme} @ {ebn0:g} dB: ber={row.ber:.3e} "
                      f"fer={row.fer:.3e} (95% CI +/-{ci:.2e}) frames={row.frames} "
                      f"wall={row.wall_ms:.0f} ms{note}", file=log)
    return [row for s in cfg.schemes for row in rows_by_scheme[s]]


def _fer_ci(row):
    p = row.fer
    return 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / row.frames)


def emit_convergence(cfg, ebn0_db):
    """Average per-iteration BER trace per scheme at one Eb/N0.

    Early stopping is disabled so every frame contributes a full-length
    trace; runs exactly max_frames frames. Returns {scheme: (ber_trace,
    plateau_iteration)} where the plateau is the first iteration whose BER
    is within 5% of the final value.
    """
    bad = [s for s in cfg.schemes if s not in ("ssg", "jdd")]
    if bad:
        raise ValueError(f"convergence traces support ssg/jdd only, got {bad}")
    ctx = _get_context(cfg)
    traces = {}
    run_cfg = dataclasses.replace(cfg, target_errors=10 ** 9)  # error stop off
    run_point(run_cfg, ebn0_db, early_stop=False, want_trace=True,
              collect_traces=traces)
    total = ctx.cbs.J * ctx.n_info
    out = {}
    for s, frame_traces in traces.items():
        errs = np.sum(np.stack(frame_traces), axis=0)
        ber = errs / (len(frame_traces) * total)
        final = ber[-1]
        ok = np.flatnonzero(ber <= 1.05 * final if final > 0 else ber == 0)
        plateau = int(ok[0]) + 1 if ok.size else len(ber)
        out[s] = (ber, plateau)
    return out


def complexity_report(cfg, ebn0_db=None):
    """Closed-form edge-update predictions next to measured counters.

    Early stopping is disabled so measured counts must match predictions
    exactly. Returns a list of dict rows, one per scheme.
    """
    ctx = _get_context(cfg)
    ebn0 = cfg.ebn0_db[0] if ebn0_db is None else ebn0_db
    rows = run_point(cfg, ebn0, early_stop=False)
    report = []
    for row in rows:
        if row.scheme == "idd":
            epa_passes = cfg.n_out * cfg.n_epa_inner
            ldpc_passes = cfg.n_out * cfg.n_ldpc_inner
        else:
            epa_passes = ldpc_passes = cfg.n_iter
        pred_fn = row.frames * epa_passes * ctx.epa_per_pass
        pred_cn = row.frames * ldpc_passes * ctx.ldpc_per_pass
        report.append(dict(
            scheme=row.scheme, frames=row.frames,
            epa_passes=epa_passes, ldpc_passes=ldpc_passes,
            predicted_fn=pred_fn, measured_fn=row.fn_updates,
            predicted_cn=pred_cn, measured_cn=row.cn_updates,
            fn_ratio=row.fn_updates / pred_fn if pred_fn else 1.0,
            cn_ratio=row.cn_updates / pred_cn if pred_cn else 1.0))
    return report


def describe(cfg):
    """Load and validate everything a run would use; zero frames simulated."""
    ctx = _get_context(cfg)
    cbs = ctx.cbs
    lines = [
        f"codebook: J={cbs.J} users, K={cbs.K} resources, M={cbs.M}, N={cbs.N}",
        f"mimo: n_t={cfg.n_t}, n_r={cfg.n_r}, block_fading={cfg.block_fading}",
    ]
    if ctx.H is None:
        lines.append(f"code: none (uncoded), {ctx.bits_per_user} bits/user/frame")
    else:
        lines.append(f"code: ({ctx.H.n_cols},{ctx.n_info}) parity checks={ctx.H.n_rows}, "
                     f"rate {ctx.rate:g}, avg row weight "
                     f"{ctx.H.row_weights.mean():g}")
    topo = ctx.decoders[cfg.schemes[0]].topo
    lines.append(f"frame: {ctx.n_symbols} SCMA symbols, "
                 f"{topo.vn_per_symbol} bit VNs and {topo.fn_per_symbol} FNs per symbol, "
                 f"FN degree {topo.fn_degree}")
    lines.append(f"schemes: {', '.join(cfg.schemes)}; "
                 f"sweep points: {', '.join(format(e, 'g') for e in cfg.ebn0_db)} dB")
    return lines


def format_float(x):
    return format(float(x), ".17g")


def write_csv(rows, stream, timings=False):
    """Fixed-schema CSV; wall_ms is zeroed unless timing output is requested,
    keeping equal-seed runs byte-identical."""
    stream.write(",".join(CSV_COLUMNS) + "\n")
    for r in rows:
        wall = r.wall_ms if timings else 0.0
        vals = (r.scheme, format_float(r.ebn0_db), str(r.frames),
                str(r.bit_errors), str(r.frame_errors), format_float(r.ber),
                format_float(r.fer), format_float(r.avg_iters),
                str(r.fallback_events), str(r.fn_updates), str(r.cn_updates),
                format_float(wall))
        stream.write(",".join(vals) + "\n")


def write_convergence_csv(results, stream):
    stream.write("scheme,iteration,ber\n")
    for scheme, (ber, _plateau) in results.items():
        for t, b in enumerate(ber, start=1):
            stream.write(f"{scheme},{t},{format_float(b)}\n")
