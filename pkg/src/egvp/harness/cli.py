"""Command line entry point: ``egvp run|sweep|flops|check``."""
from __future__ import annotations

import argparse
import logging
import sys

from ..channel import kmh
from ..metrics import SCHEMES, FlopModel, relative_change
from ..weights import max_svd_cycle
from .config import AXES, ConfigError, load_config
from .runner import emit_results, run_scenario

log = logging.getLogger("egvp")

AXIS_ALIASES = {"v": "v_kmh", "snr": "snr_db", "nt": "n_t", "delay": "csi_delay", "sampling_snr": "sampling_snr_db"}


def _parse_axis(text: str):
    """``name=v1,v2,...`` into ``(axis, [values])``; ``none`` maps to ``None``."""
    name, sep, values = text.partition("=")
    if not sep or not values:
        raise argparse.ArgumentTypeError(f"expected AXIS=V1,V2,..., got {text!r}")
    axis = AXIS_ALIASES.get(name.strip(), name.strip())
    if axis not in AXES:
        raise argparse.ArgumentTypeError(f"unknown axis {name!r}; choose from {', '.join(AXES)}")
    out = []
    for v in values.split(","):
        v = v.strip()
        try:
            out.append(None if v.lower() in ("none", "inf") else float(v))
        except ValueError:
            raise argparse.ArgumentTypeError(f"axis value {v!r} is not a number") from None
    return axis, out


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", nargs="?", help="YAML scenario file (defaults apply when omitted)")
    p.add_argument("--out", help="write results here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--seed", type=int, help="first seed; the seed count stays as configured")
    p.add_argument("--n-seeds", type=int, help="number of seeds")
    p.add_argument("--timing", action="store_true", help="add a wall-time column")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="egvp", description="Eigenvector prediction simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario (and its sweep, if configured)")
    _add_output_flags(p)

    p = sub.add_parser("sweep", help="run a scenario over one axis")
    _add_output_flags(p)
    p.add_argument("--axis", type=_parse_axis, required=True, help=f"AXIS=V1,V2,... with AXIS in {', '.join(AXES)}")

    p = sub.add_parser("flops", help="print the FLOP comparison table")
    p.add_argument("--n-t", type=int, default=64)
    p.add_argument("--n-f", type=int, default=51)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--n-svd", type=int, default=7)
    p.add_argument("--t-svd", type=int, default=7)

    p = sub.add_parser("check", help="longest SVD cycle for a speed, carrier and subframe")
    p.add_argument("--v", type=float, required=True, help="UE speed in km/h")
    p.add_argument("--f0", type=float, default=3.5e9, help="carrier in Hz")
    p.add_argument("--delta-t", type=float, default=0.5e-3, help="subframe in s")
    p.add_argument("--t-svd", type=int, help="also test this cycle (subframes); exit 1 if it violates the bound")
    return parser


def _load(args, sweep=None):
    cfg = load_config(args.config)
    if args.seed is not None or args.n_seeds is not None:
        first = cfg.seeds[0] if args.seed is None else args.seed
        count = len(cfg.seeds) if args.n_seeds is None else args.n_seeds
        cfg = cfg.replace(seeds=tuple(range(first, first + count)))
    if sweep is not None:
        cfg = cfg.replace(sweep={sweep[0]: sweep[1]})
    return cfg


def _simulate(args, sweep=None) -> int:
    cfg = _load(args, sweep)
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")

    def progress(done, total):
        log.info("finished %d/%d runs", done, total)

    rows, failures = run_scenario(cfg, workers=args.workers, progress=progress)
    for msg in failures:
        log.error("run failed: %s", msg)
    out = args.out or cfg.output
    text = emit_results(rows, out, args.format, args.timing)
    if out is None:
        sys.stdout.write(text)
    else:
        log.info("wrote %d rows to %s", len(rows), out)
    return 1 if failures else 0


def _flops(args) -> int:
    model = FlopModel(n_t=args.n_t, n_f=args.n_f, m=args.m, n_svd=args.n_svd, t_svd=args.t_svd)
    table = model.table()
    egvp = table["egvp"]
    print(f"FLOPs per interval of {args.n_svd}x{args.t_svd} subframes (N_t={args.n_t}, N_f={args.n_f}, M={args.m})")
    print(f"{'scheme':<10} {'flops':>12} {'egvp vs scheme':>15}")
    for scheme in SCHEMES:
        print(f"{scheme:<10} {table[scheme]:>12.4e} {relative_change(egvp, table[scheme]):>14.2f}%")
    return 0


def _check(args) -> int:
    bound = max_svd_cycle(kmh(args.v), args.f0, args.delta_t)
    print(f"v={args.v:g} km/h, f0={args.f0:g} Hz, subframe={args.delta_t:g} s")
    print(f"exact bound: {bound.exact * 1e3:.4f} ms")
    print(f"max T_svd: {bound.subframes:g} subframes ({bound.duration * 1e3:g} ms)")
    if args.t_svd is not None:
        ok = args.t_svd <= bound.subframes
        print(f"T_svd={args.t_svd}: {'within' if ok else 'exceeds'} the bound")
        return 0 if ok else 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "run":
            return _simulate(args)
        if args.command == "sweep":
            return _simulate(args, args.axis)
        if args.command == "flops":
            return _flops(args)
        return _check(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
