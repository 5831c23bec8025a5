"""Command line: ``irsbf run | sweep | plot | dump-channels``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

from .algorithm import AlgorithmOptions, draw_estimate, run_algorithm1, run_robust
from .channel import dump_channels
from .experiments import AXES, PLOT_KINDS, SweepSpec, all_finite, emit_plot, read_csv, run_sweep, write_csv
from .scenario import PROFILES, SystemConfig, parse_value, load_config
from .sca import SubproblemError

logger = logging.getLogger("irsbf")


def _add_config_flags(p):
    p.add_argument("--profile", choices=sorted(PROFILES), default="desk",
                   help="base parameter set (default: desk)")
    p.add_argument("--config", type=Path, help="file of 'key = value' lines applied on top of the profile")
    group = p.add_argument_group("per-field overrides")
    for f in dataclasses.fields(SystemConfig):
        if f.name == "epsilon":          # given through --epsilon
            continue
        group.add_argument("--" + f.name.replace("_", "-"), dest="set_" + f.name, metavar="V")
    group.add_argument("--p-max-dbm", dest="set_p_max_dbm", metavar="DBM")


def _add_algo_flags(p):
    p.add_argument("--r-max", type=int, default=10, help="outer iteration limit")
    p.add_argument("--mc-samples", type=int, default=2000, help="Monte-Carlo ball samples for robust runs")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_config(args):
    cfg = PROFILES[args.profile]()
    if args.config is not None:
        cfg = load_config(args.config, base=cfg)
    changes = {}
    for key, val in vars(args).items():
        if key.startswith("set_") and val is not None:
            name = key[4:]
            changes[name] = float(val) if name == "p_max_dbm" else parse_value(name, val)
    return cfg.replace(**changes) if changes else cfg


def build_options(args):
    return AlgorithmOptions(r_max=args.r_max, mc_samples=args.mc_samples)


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_run(args):
    cfg = build_config(args)
    opts = build_options(args)
    try:
        if args.robust:
            rec = run_robust(cfg, eps=args.epsilon[0] if args.epsilon else cfg.epsilon, options=opts)
        else:
            rec = run_algorithm1(cfg, options=opts)
    except SubproblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = rec.to_json()
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "run.json").write_text(text + "\n")
        emit_plot([json.loads(text)], "convergence", out / "convergence.svg")
        print(f"wrote {out / 'run.json'} and {out / 'convergence.svg'}")
    else:
        print(text)
    values = [rec.rate] + list(rec.per_user)
    if rec.certified_rate is not None:
        values.append(rec.certified_rate)
    summary = f"rate {rec.rate / 1e9:.6f} Gbit/s after {rec.outer_iterations} outer iterations"
    if rec.certified_rate is not None:
        summary += f", certified {rec.certified_rate / 1e9:.6f} Gbit/s at eps={rec.epsilon:g}"
    print(summary, file=sys.stderr)
    return 0 if all(math.isfinite(v) for v in values) else 1


def cmd_sweep(args):
    cfg = build_config(args)
    if args.axis == "weights":
        values = [v for v in args.values.split(";") if v.strip()]
    else:
        values = [v for v in args.values.split(",") if v.strip()]
    spec = SweepSpec(axis=args.axis, values=tuple(values), seeds=args.seeds, base=cfg,
                     robust=args.robust, epsilons=tuple(args.epsilon or (cfg.epsilon,)),
                     options=build_options(args), workers=args.workers)
    rows = run_sweep(spec)
    text = write_csv(rows)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"sweep_{args.axis}.csv"
    csv_path.write_text(text)
    plot_path = emit_plot(rows, "rate", out / f"sweep_{args.axis}.svg")
    print(f"wrote {csv_path} and {plot_path}")
    ok = all_finite(rows)
    if not ok:
        print("some rows are not finite (see the status column)", file=sys.stderr)
    return 0 if ok else 1


def cmd_plot(args):
    src = Path(args.input)
    text = src.read_text()
    if args.kind == "rate":
        rows = read_csv(text)
        source = rows
    else:
        source = [json.loads(text)]
    out = Path(args.out) if args.out else src.with_suffix(".svg")
    emit_plot(source, args.kind, out)
    print(f"wrote {out}")
    return 0 if args.kind != "rate" or all_finite(source) else 1


def cmd_dump_channels(args):
    cfg = build_config(args)
    eps = args.epsilon[0] if args.epsilon else cfg.epsilon
    truth, est = draw_estimate(cfg, eps)
    ch = est if args.estimated else truth
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            dump_channels(ch, fh)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(dump_channels(ch))
    return 0


def make_parser():
    parser = argparse.ArgumentParser(prog="irsbf", description=(
        "Hybrid beamforming and IRS phase design for wideband multi-user downlinks."))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="optimise one scenario and print its run record")
    _add_config_flags(p)
    _add_algo_flags(p)
    p.add_argument("--robust", action="store_true", help="design against a bounded CSI error")
    p.add_argument("--epsilon", type=_floats, help="error bound ||dg||^2 <= eps")
    p.add_argument("--out-dir", help="write run.json and convergence.svg here instead of printing")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep one axis over seeds; writes CSV and a rate plot")
    _add_config_flags(p)
    _add_algo_flags(p)
    p.add_argument("--axis", required=True, choices=AXES)
    p.add_argument("--values", required=True,
                   help="comma-separated values; for weights, ';'-separated lists such as '1,1;1,3'")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds per value")
    p.add_argument("--robust", action="store_true")
    p.add_argument("--epsilon", type=_floats, help="comma-separated error bounds, one series each")
    p.add_argument("--workers", type=int, default=1, help="parallel processes")
    p.add_argument("--out-dir", default="results")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render a sweep CSV or run record as SVG")
    p.add_argument("input", help="sweep CSV (kind=rate) or run.json (kind=convergence)")
    p.add_argument("--kind", choices=PLOT_KINDS, default="rate")
    p.add_argument("--out", help="output SVG path (default: input with .svg suffix)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("dump-channels", help="write the generated channel set as CSV")
    _add_config_flags(p)
    p.add_argument("--estimated", action="store_true", help="dump the estimate instead of the true channel")
    p.add_argument("--epsilon", type=_floats, help="error bound used for the estimate")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=cmd_dump_channels)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(getattr(args, "verbose", 0), 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
