"""Command-line entry point: ``infexplore <mode> [options]``.

Exit status is 0 on success, 2 for usage errors (bad flags, missing or
out-of-range parameters, malformed reservoir specs) and 1 for runtime
failures such as an unwritable output file.
"""
import argparse
import json
import sys

from .harness import (MODES, ExperimentConfig, rows_to_csv, rows_to_json, run_trials,
                      trace_lines)
from .reservoir import ReservoirParseError, parse_reservoir

# CLI flag -> config parameter
PARAM_FLAGS = {
    "eta": float, "eta2": float, "eps": float, "eps1": float, "delta": float,
    "alpha": float, "beta": float, "budget": None, "rho": float, "rho1": float,
    "rho2": float, "c_const": float, "alg_rho": float,
}


def _count(text):
    """Integer that also accepts ``1e5``-style input."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v.is_integer() or v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text!r}")
    return int(v)


def _common(p):
    g = p.add_argument_group("experiment")
    g.add_argument("--reservoir", help="uniform:LO,HI | atoms:V@W,... | "
                   "admissible:alpha=,beta=,eta=,rho= | density:X0,..;F1,..")
    g.add_argument("--trials", type=_count, default=1)
    g.add_argument("--seed", type=_count, default=0, help="master seed")
    g.add_argument("--out", help="row output file (default: none)")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--trace", help="write per-checkpoint trace / ledger JSON lines here")
    g.add_argument("--threads", type=_count, default=None,
                   help="worker processes (default: INFEXPLORE_THREADS or 1)")
    g.add_argument("--no-timing", action="store_true",
                   help="write ns=0 so reruns are byte-identical")
    a = p.add_argument_group("algorithm")
    a.add_argument("--eta", type=float)
    a.add_argument("--eta2", type=float, help="lower quantile level for reduce-avg")
    a.add_argument("--eps", type=float)
    a.add_argument("--eps1", type=float, help="target slack for reduce-esssup")
    a.add_argument("--delta", type=float)
    a.add_argument("--alpha", type=float)
    a.add_argument("--beta", type=float)
    a.add_argument("--budget", type=_count)
    a.add_argument("--rho", type=float)
    a.add_argument("--rho1", type=float)
    a.add_argument("--rho2", type=float)
    a.add_argument("--c-const", dest="c_const", type=float)
    a.add_argument("--alg-rho", dest="alg_rho", type=float,
                   help="schedule rho of the algorithm run against the adversary")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="infexplore",
        description="Pure-exploration simulations for infinitely many Bernoulli arms.")
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        _common(sub.add_parser(mode, help=f"run {mode} trials"))
    sw = sub.add_parser("sweep", help="one summary per value of a parameter")
    sw.add_argument("--mode", required=True, choices=MODES)
    sw.add_argument("--param", required=True,
                    help="parameter to vary, e.g. budget, delta, eta, trials")
    sw.add_argument("--values", required=True, help="comma-separated values, e.g. 1e4,1e5")
    _common(sw)
    return parser


def _config(args, mode):
    params = {k: getattr(args, k) for k in PARAM_FLAGS}
    if args.reservoir is not None:
        parse_reservoir(args.reservoir)  # fail early with a position
    return ExperimentConfig(mode=mode, reservoir=args.reservoir, params=params,
                            trials=args.trials, master_seed=args.seed,
                            timing=not args.no_timing, trace=bool(args.trace))


def _sweep_value(param, text):
    if param in ("budget", "trials", "seed"):
        return _count(text)
    if param == "reservoir":
        return text
    return float(text)


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        if args.command == "sweep":
            if args.param not in PARAM_FLAGS and args.param not in ("trials", "seed",
                                                                     "reservoir"):
                raise ValueError(f"cannot sweep over {args.param!r}")
            values = [v for v in args.values.split(",") if v.strip()]
            if not values:
                raise ValueError("--values is empty")
            cfgs = []
            for v in values:
                setattr(args, args.param, _sweep_value(args.param, v.strip()))
                cfgs.append(_config(args, args.mode))
        else:
            cfgs = [_config(args, args.command)]
    except (ValueError, TypeError, ReservoirParseError, argparse.ArgumentTypeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"infexplore: error: {exc}", file=sys.stderr)
        return 2

    try:
        summaries, all_rows, traces = [], [], []
        for cfg in cfgs:
            rows, summary = run_trials(cfg, args.threads)
            if args.command == "sweep":
                summary = {"param": args.param, "value": _param_value(cfg, args.param),
                           **summary}
            summaries.append(summary)
            all_rows.append((rows, summary))
            if args.trace:
                traces.append(trace_lines(rows))
        if args.out:
            if args.command == "sweep" or args.format == "json":
                text = "".join(rows_to_json(r, s) for r, s in all_rows)
            else:
                text = rows_to_csv(all_rows[0][0])
            _write(args.out, text)
        if args.trace:
            _write(args.trace, "".join(traces))
    except ValueError as exc:
        print(f"infexplore: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as exc:
        print(f"infexplore: runtime error: {exc}", file=sys.stderr)
        return 1
    out = summaries if args.command == "sweep" else summaries[0]
    print(json.dumps(out, indent=1, default=str))
    return 0


def _param_value(cfg, name):
    if name == "trials":
        return cfg.trials
    if name in ("seed", "master_seed"):
        return cfg.master_seed
    if name == "reservoir":
        return cfg.reservoir
    return cfg.params.get(name)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
