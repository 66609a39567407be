"""Command line front end: Eb/N0 sweeps, convergence traces, complexity reports."""

import argparse
import contextlib
import json
import sys

from . import harness
from .codec import CodebookError
from .ldpc import AlistFormatError


def parse_ebn0(text):
    """Either a single dB value or an inclusive START:STOP:STEP range."""
    parts = str(text).split(":")
    try:
        if len(parts) == 1:
            return (float(parts[0]),)
        if len(parts) != 3:
            raise ValueError
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a dB value or START:STOP:STEP, got {text!r}") from None
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError("need STOP >= START and STEP > 0")
    n = int((stop - start) / step + 1e-9) + 1
    return tuple(start + k * step for k in range(n))


# (flag dest, SimConfig field)
_FIELD_MAP = (
    ("scheme", "scheme"), ("nt", "n_t"), ("nr", "n_r"), ("ebn0", "ebn0_db"),
    ("iters", "n_iter"), ("outer", "n_out"), ("inner_epa", "n_epa_inner"),
    ("inner_ldpc", "n_ldpc_inner"), ("seed", "seed"),
    ("max_frames", "max_frames"), ("target_errors", "target_errors"),
    ("codebook", "codebook"), ("ldpc", "ldpc"), ("damping", "damping"),
    ("llr_mode", "llr_mode"), ("block_fading", "block_fading"),
    ("workers", "workers"), ("symbols", "n_symbols"), ("out", "out"),
)


def build_parser():
    p = argparse.ArgumentParser(
        prog="scmasim",
        description="Link-level BER simulator for uplink MIMO-SCMA with a "
                    "merged detection/decoding graph receiver.")
    p.add_argument("--config", help="JSON file with SimConfig fields; flags override")
    p.add_argument("--scheme", choices=("ssg", "jdd", "idd", "all"))
    p.add_argument("--nt", type=int, help="transmit antennas per user")
    p.add_argument("--nr", type=int, help="receive antennas")
    p.add_argument("--ebn0", type=parse_ebn0,
                   help="Eb/N0 sweep, START:STOP:STEP inclusive or one value")
    p.add_argument("--iters", type=int, help="iterations for ssg/jdd")
    p.add_argument("--outer", type=int, help="idd outer loops")
    p.add_argument("--inner-epa", type=int, help="idd detector iterations per loop")
    p.add_argument("--inner-ldpc", type=int, help="idd decoder iterations per loop")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--max-frames", type=int)
    p.add_argument("--target-errors", type=int,
                   help="frame errors to accumulate per point")
    p.add_argument("--codebook", help="codebook JSON path or 'default'")
    p.add_argument("--ldpc", help="alist path, 'default', or 'none' for uncoded")
    p.add_argument("--damping", type=float)
    p.add_argument("--llr-mode", choices=("exact", "paper"))
    p.add_argument("--block-fading", type=int,
                   help="SCMA symbols sharing one channel draw")
    p.add_argument("--workers", type=int, help="parallel frame workers")
    p.add_argument("--symbols", type=int, help="frame length in symbols (uncoded)")
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.add_argument("--timings", action="store_true",
                   help="emit real wall_ms instead of the deterministic 0")
    p.add_argument("--convergence", action="store_true",
                   help="per-iteration BER trace at a single Eb/N0")
    p.add_argument("--complexity", action="store_true",
                   help="predicted vs measured edge-update counters")
    p.add_argument("--validate-only", action="store_true",
                   help="validate codebook/code/topology and exit")
    return p


def build_config(args, parser):
    merged = {}
    if args.config:
        try:
            with open(args.config) as f:
                loaded = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise RuntimeError(f"config file {args.config}: {e}") from e
        valid = {f.name for f in harness.SimConfig.__dataclass_fields__.values()}
        unknown = set(loaded) - valid
        if unknown:
            parser.error(f"unknown config file fields: {sorted(unknown)}")
        merged.update(loaded)
    for dest, field in _FIELD_MAP:
        val = getattr(args, dest)
        if val is not None:
            merged[field] = val
    if args.timings:
        merged["timings"] = True
    if isinstance(merged.get("ebn0_db"), str):
        merged["ebn0_db"] = parse_ebn0(merged["ebn0_db"])
    if isinstance(merged.get("ebn0_db"), list):
        merged["ebn0_db"] = tuple(float(v) for v in merged["ebn0_db"])

    scheme = merged.get("scheme", "ssg")
    if scheme in ("ssg", "jdd"):
        given = [name for name, val in (("--outer", args.outer),
                                        ("--inner-epa", args.inner_epa),
                                        ("--inner-ldpc", args.inner_ldpc))
                 if val is not None]
        if given:
            parser.error(f"{', '.join(given)} only apply to --scheme idd or all")
    if scheme == "idd" and args.iters is not None:
        parser.error("--iters applies to ssg/jdd; use --outer/--inner-epa/--inner-ldpc")

    try:
        return harness.SimConfig(**merged)
    except (TypeError, ValueError) as e:
        parser.error(str(e))


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w") as f:
            yield f


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args, parser)
        if args.validate_only:
            for line in harness.describe(cfg):
                print(line)
            return 0
        if args.complexity:
            report = harness.complexity_report(cfg)
            with _output(cfg.out) as f:
                f.write("scheme,frames,epa_passes,ldpc_passes,predicted_fn,"
                        "measured_fn,fn_ratio,predicted_cn,measured_cn,cn_ratio\n")
                for r in report:
                    f.write(f"{r['scheme']},{r['frames']},{r['epa_passes']},"
                            f"{r['ldpc_passes']},{r['predicted_fn']},"
                            f"{r['measured_fn']},{r['fn_ratio']:g},"
                            f"{r['predicted_cn']},{r['measured_cn']},"
                            f"{r['cn_ratio']:g}\n")
            return 0
        if args.convergence:
            if len(cfg.ebn0_db) != 1:
                parser.error("--convergence needs a single --ebn0 value")
            results = harness.emit_convergence(cfg, cfg.ebn0_db[0])
            for scheme, (ber, plateau) in results.items():
                print(f"{scheme}: plateau at iteration {plateau} "
                      f"(final ber {ber[-1]:.3e})", file=sys.stderr)
            with _output(cfg.out) as f:
                harness.write_convergence_csv(results, f)
            return 0
        rows = harness.run_sweep(cfg, log=sys.stderr)
        with _output(cfg.out) as f:
            harness.write_csv(rows, f, timings=cfg.timings)
        return 0
    except (CodebookError, AlistFormatError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
