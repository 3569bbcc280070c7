"""Command-line entry point: train, eval, autocorr, synth, repr-sim, gradcheck.

Errors exit with status 1 and a single ``error: <kind>: <message>`` line on
stderr. Tables go to stdout (or ``--out``) as CSV with a header row.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import autocorr, gradcheck
from .config import RunConfig, load_config
from .data import WindowSpec, chrono_split, load_csv
from .errors import AutoconError
from .synth import SynthSpec, series_csv, synth

log = logging.getLogger("autocon")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            p.add_argument(flag, dest=f.name, nargs="?", const="true", default=None, metavar="BOOL")
        else:
            p.add_argument(flag, dest=f.name, default=None)


def _run_config(args) -> RunConfig:
    overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    return load_config(args.config, **overrides)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_train(args) -> int:
    from .train import train

    art = train(_run_config(args))
    agg = art.report.aggregate()
    print(f"config_hash = {art.config_hash}")
    print(f"out_dir = {art.out_dir}")
    for k, v in agg.items():
        print(f"test_{k} = {v!r}")
    return 0


def cmd_eval(args) -> int:
    from .train import evaluate

    overrides = {k: getattr(args, k) for k in ("data", "date_column", "synthetic") if getattr(args, k)}
    report = evaluate(args.checkpoint, args.split, with_dtw=not args.no_dtw, **overrides)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"eval_{args.split}.csv").write_text(report.to_csv())
        (out / f"eval_{args.split}.txt").write_text(report.summary())
    sys.stdout.write(report.summary())
    return 0


def cmd_autocorr(args) -> int:
    from .train import acf_csv

    series = load_csv(args.data, args.date_column)
    values = series.values
    if args.split_train:
        spec = WindowSpec(args.input_len, args.output_len)
        split = chrono_split(series, spec, tuple(float(x) for x in args.split.split(",")))
        values = split.train.values
    max_lag = args.max_lag if args.max_lag is not None else values.shape[0] - 2
    n = values.shape[0]
    k = min(args.smoothing or autocorr.default_smoothing(series.freq), n if n % 2 else n - 1)
    acf = autocorr.global_acf(values, max_lag, k, args.method)
    _emit(acf_csv(acf), args.out)
    if args.figure:
        from .plots import plot_acf

        plot_acf(acf.values, args.figure)
    return 0


def cmd_synth(args) -> int:
    comps = []
    for c in args.sine or ["1000:1", "24:0.5"]:
        p, _, a = c.partition(":")
        comps.append((float(p), float(a or 1.0)))
    spec = SynthSpec(tuple(comps), args.slope, args.noise, args.length, args.seed, args.freq, args.start)
    _emit(series_csv(synth(spec)), args.out)
    return 0


def cmd_repr_sim(args) -> int:
    from .train import repr_sim, repr_sim_csv

    overrides = {k: getattr(args, k) for k in ("data", "date_column", "synthetic") if getattr(args, k)}
    result = repr_sim(args.checkpoint, args.anchor, args.split, smooth_k=args.smooth, **overrides)
    _emit(repr_sim_csv(result), args.out)
    if args.figure:
        from .plots import plot_repr_sim

        plot_repr_sim(result["starts"], result["sims"][0], result["smoothed"][0], args.anchor, args.figure)
    return 0


def cmd_gradcheck(args) -> int:
    report = gradcheck.run(range(args.seeds))
    _emit(gradcheck.report_csv(report, args.tol), args.out)
    return 0 if all(v < args.tol for v in report.values()) else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autocon", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write run artifacts")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("checkpoint")
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--data")
    p.add_argument("--date-column", dest="date_column")
    p.add_argument("--synthetic")
    p.add_argument("--no-dtw", action="store_true")
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("autocorr", help="emit the global ACF as lag,channel,acf CSV")
    p.add_argument("data")
    p.add_argument("--date-column", dest="date_column")
    p.add_argument("--max-lag", dest="max_lag", type=int)
    p.add_argument("--smoothing", type=int, default=0)
    p.add_argument("--method", choices=("fft", "direct"), default="fft")
    p.add_argument("--split-train", dest="split_train", action="store_true",
                   help="restrict to the training split")
    p.add_argument("--input-len", dest="input_len", type=int, default=96)
    p.add_argument("--output-len", dest="output_len", type=int, default=96)
    p.add_argument("--split", default="6,2,2")
    p.add_argument("--out")
    p.add_argument("--figure")
    p.set_defaults(func=cmd_autocorr)

    p = sub.add_parser("synth", help="write a synthetic sum-of-sines series")
    p.add_argument("--sine", action="append", metavar="PERIOD:AMP")
    p.add_argument("--slope", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--length", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--freq", default="h")
    p.add_argument("--start", default="2016-07-01T00:00:00")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("repr-sim", help="anchor-vs-all pooled representation similarity")
    p.add_argument("checkpoint")
    p.add_argument("--anchor", type=int, required=True)
    p.add_argument("--split", default="train", choices=("train", "val", "test"))
    p.add_argument("--smooth", type=int, default=25)
    p.add_argument("--data")
    p.add_argument("--date-column", dest="date_column")
    p.add_argument("--synthetic")
    p.add_argument("--out")
    p.add_argument("--figure")
    p.set_defaults(func=cmd_repr_sim)

    p = sub.add_parser("gradcheck", help="finite-difference audit of every op")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--tol", type=float, default=gradcheck.TOLERANCE)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except AutoconError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
