"""Command-line interface: simulate, estimate, sweep, reproduce."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .backend import DEFAULT_BACKEND, resolve_threads
from . import config as cfgmod
from . import dataio
from .estimators import estimate_peak_time, estimate_valor
from .harness import FIGURES, reproduce_figure, run_sweep
from .physics import effective_diffusion
from .simulate import run_ensemble, with_seed


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (overrides config)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: VALOR_THREADS or all cores)")
    parser.add_argument("--out-dir", default=".", help="output directory")
    parser.add_argument("--backend", choices=["compiled", "numpy"], default=None,
                        help=f"simulation backend (default: {DEFAULT_BACKEND})")
    parser.add_argument("--scale", choices=["full", "desk"], default="desk",
                        help="experiment scale (reproduce only)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="valor",
        description="Vessel-channel Monte Carlo simulation and distance estimation",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="run an ensemble and write signal CSVs")
    _common(ps)
    ps.add_argument("--config", required=True, help="scenario JSON")
    ps.add_argument("--reps", type=int, default=1, help="replications")

    pe = sub.add_parser("estimate", help="estimate distance from a signal CSV")
    _common(pe)
    pe.add_argument("--signal", required=True, nargs="+",
                    help="signal CSV file(s) written by `simulate`")
    pe.add_argument("--method", choices=["valor", "peak_time", "both"],
                    default="valor")
    pe.add_argument("--emission-time", type=float, default=None,
                    help="known emission time for the peak-time baseline "
                         "(default: the record's true offset)")
    pe.add_argument("--smoothing", type=int, default=51,
                    help="odd moving-average window for the peak baseline")
    pe.add_argument("--tail-clip", type=float, default=None,
                    help="drop edge samples below this fraction of the peak "
                         "(biases the variance low; for short records only)")
    pe.add_argument("--out", default=None, help="output CSV path")

    pw = sub.add_parser("sweep", help="run a parameter sweep from a sweep JSON")
    _common(pw)
    pw.add_argument("--config", required=True, help="sweep JSON")

    pr = sub.add_parser("reproduce", help="reproduce a verification figure")
    _common(pr)
    pr.add_argument("figure", choices=list(FIGURES))
    pr.add_argument("--M", type=int, default=None, dest="m_override",
                    help="override molecule count (smoke runs)")
    pr.add_argument("--reps", type=int, default=None, dest="reps_override",
                    help="override replication count (smoke runs)")
    return p


def _cmd_simulate(args) -> int:
    channel, sim = cfgmod.load_scenario(args.config)
    if args.seed is not None:
        sim = with_seed(sim, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = run_ensemble(
        channel, sim, args.reps, backend=args.backend, n_threads=args.threads
    )
    paths = []
    for rep, rec in enumerate(records):
        path = dataio.write_signal_csv(rec, out_dir / f"signal_rep{rep:04d}.csv")
        paths.append(str(path))
    print(json.dumps({"written": paths}, indent=2))
    return 0


def _cmd_estimate(args) -> int:
    rows = []
    for sig_path in args.signal:
        record = dataio.read_signal_csv(sig_path)
        meta = record.meta
        if "channel" not in meta:
            print(f"error: {sig_path} has no metadata sidecar; cannot recover "
                  "channel parameters", file=sys.stderr)
            return 2
        channel = dataio.channel_from_meta(meta)
        d_e = effective_diffusion(channel)
        seed = meta.get("sim", {}).get("seed", 0)
        rep = meta.get("rep", 0)
        emission = args.emission_time
        if emission is None:
            emission = meta.get("sim", {}).get("tau_offset", 0.0)
        if args.method in ("valor", "both"):
            est = estimate_valor(
                record, channel.v_avg, d_e, channel=channel,
                tail_clip=args.tail_clip,
            )
            rows.append(dataio.estimate_row(est, channel.l, seed, rep))
        if args.method in ("peak_time", "both"):
            est = estimate_peak_time(
                record, emission, channel.v_avg, args.smoothing, channel=channel
            )
            rows.append(dataio.estimate_row(est, channel.l, seed, rep))
    out = Path(args.out) if args.out else Path(args.out_dir) / "estimates.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    dataio.write_estimates_csv(rows, out)
    print(json.dumps({"written": str(out), "rows": len(rows)}, indent=2))
    return 0


def _cmd_sweep(args) -> int:
    spec = cfgmod.load_sweep(args.config)
    result = run_sweep(
        spec,
        master_seed=args.seed,
        backend=args.backend,
        n_threads=args.threads,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    keys: list = []
    for row in result.rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    path = dataio.write_table_csv(
        out_dir / "sweep.csv",
        keys,
        ([row.get(k) for k in keys] for row in result.rows),
    )
    dataio.write_manifest(out_dir / "sweep_manifest.json", {
        "spec": {
            "axes": spec.axes,
            "n_reps": spec.n_reps,
            "metrics": list(spec.metrics),
        },
        "r2": {str(k): v for k, v in result.r2.items()},
        "failures": result.failures,
        **result.meta,
    })
    print(json.dumps({"written": str(path), "rows": len(result.rows),
                      "failures": len(result.failures)}, indent=2))
    return 0


def _cmd_reproduce(args) -> int:
    manifest = reproduce_figure(
        args.figure,
        args.scale,
        master_seed=args.seed if args.seed is not None else 0,
        out_dir=args.out_dir,
        backend=args.backend,
        n_threads=args.threads,
        M_override=args.m_override,
        reps_override=args.reps_override,
    )
    print(json.dumps(manifest, indent=2, default=str))
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "sweep": _cmd_sweep,
    "reproduce": _cmd_reproduce,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        resolve_threads(args.threads)  # validate early
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
