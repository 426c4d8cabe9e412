"""Command-line entry point: ``micvar {select,simulate,experiment,forecast}``.

Exit codes: 0 success, 2 bad input data or configuration, 3 numerical failure.
Output files are written to a temporary name and renamed on success.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .criteria import parse_criteria, select_many
from .errors import ConfigError, DataError, NumericalError
from .estimation import sample_loss_curve
from .experiments import ExperimentConfig, build_process, run_experiment
from .forecasting import ForecastProtocol, evaluate
from .process import process_from_json, simulate
from .timeseries import TimeSeries, demean, first_difference, log_transform, read_csv, write_csv

EXIT_OK, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3
SCHEMA_VERSION = 1


def _atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        _atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _load_series(args) -> TimeSeries:
    header = {"auto": None, "yes": True, "no": False}[args.header]
    series = read_csv(args.input, has_header=header)
    if args.log:
        series, _ = log_transform(series)
    if args.diff:
        series, _ = first_difference(series)
        print("note: stationarity of the differenced series (ADF/KPSS) is not checked; "
              "test it separately.", file=sys.stderr)
    if args.demean:
        series, _ = demean(series)
    return series


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", "-i", required=True, help="CSV file, one row per time point")
    p.add_argument("--header", choices=["auto", "yes", "no"], default="auto")
    p.add_argument("--log", action="store_true", help="take natural logs first")
    p.add_argument("--diff", action="store_true", help="first-difference (after --log)")
    p.add_argument("--demean", action="store_true", help="subtract column means (after --diff)")
    p.add_argument("--pmax", type=int, default=10)
    p.add_argument("--criteria", default="mic,aic,bic,hq",
                   help="comma list of mic, aic, bic, hq, mic-sp, mic-mt, mic-oracle:LAMBDA, or 'all'")


# -- subcommands ---------------------------------------------------------------


def cmd_select(args) -> int:
    series = _load_series(args)
    kinds = parse_criteria(args.criteria)
    results = select_many(series, args.pmax, kinds)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "n": series.n,
        "k": series.k,
        "series": list(series.names),
        "p_max": args.pmax,
        "criteria": {kind.label: res.to_dict() for kind, res in results.items()},
    }
    _emit(_dumps(doc), args.out)
    if not args.quiet:
        print(f"{'criterion':<12}{'order':>6}", file=sys.stderr)
        for kind, res in results.items():
            print(f"{kind.label:<12}{res.chosen_order:>6}", file=sys.stderr)
    if args.dump_fits:
        z = series.values - series.values.mean(axis=0)
        top = 2 * args.pmax if any(k.needs_double_range for k in kinds) else args.pmax
        _atomic_write(args.dump_fits, _dumps({"schema_version": SCHEMA_VERSION,
                                               "fits": [f.to_dict() for f in sample_loss_curve(z, top)]}))
    if args.emit_plot_data:
        d = Path(args.emit_plot_data)
        d.mkdir(parents=True, exist_ok=True)
        for kind, res in results.items():
            _atomic_write(d / f"scores_{kind.label.lower()}.csv", res.to_csv())
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.spec:
        coef, noise = process_from_json(Path(args.spec).read_text(encoding="utf-8"))
    elif args.setting:
        coef, noise = build_process(args.setting, args.noise, args.process_seed)
    else:
        raise ConfigError("give --spec or --setting")
    series = simulate(coef, noise, args.n, args.seed)
    if args.out and args.out != "-":
        write_csv(series, args.out)
    else:
        w = sys.stdout
        w.write(",".join(series.names) + "\n")
        for row in series.values:
            w.write(",".join(format(x, ".17g") for x in row) + "\n")
    return EXIT_OK


def _load_config(ref: str) -> ExperimentConfig:
    path = Path(ref)
    if not path.exists():
        bundled = resources.files("micvar") / "configs" / (ref if ref.endswith(".json") else ref + ".json")
        if not bundled.is_file():
            raise ConfigError(f"config {ref!r} not found (neither a file nor a bundled config)")
        return ExperimentConfig.from_json(bundled.read_text(encoding="utf-8"))
    return ExperimentConfig.from_json(path.read_text(encoding="utf-8"))


def cmd_experiment(args) -> int:
    config = _load_config(args.config)
    if args.B is not None:
        config = dataclasses.replace(config, B=args.B)
    result = run_experiment(config, workers=args.threads)
    _emit(result.to_csv(), args.out)
    n_fail = sum(c.failed for c in result.cells)
    if n_fail:
        print(f"warning: {n_fail} criterion evaluations failed; see the 'failures' column", file=sys.stderr)
    if args.emit_plot_data:
        d = Path(args.emit_plot_data)
        d.mkdir(parents=True, exist_ok=True)
        lines = ["criterion,n,b,chosen_order"]
        for (crit, n), picks in result.chosen.items():
            lines += [f"{crit},{n},{b},{'' if p is None else p}" for b, p in enumerate(picks)]
        _atomic_write(d / f"{result.setting}_chosen_orders.csv", "\n".join(lines) + "\n")
        _atomic_write(d / f"{result.setting}_accuracy.csv", result.to_csv())
    return EXIT_OK


def cmd_forecast(args) -> int:
    series = _load_series(args)
    protocol = ForecastProtocol(p_max=args.pmax, criteria=tuple(parse_criteria(args.criteria)), split=args.split)
    report = evaluate(series, protocol)
    _emit(_dumps({"schema_version": SCHEMA_VERSION, **report.to_dict()}), args.out)
    if args.errors_csv:
        _atomic_write(args.errors_csv, report.errors_csv())
    if not args.quiet:
        print(f"{'criterion':<12}{'order':>6}{'wMSFE':>10}", file=sys.stderr)
        for name, r in report.results.items():
            print(f"{name:<12}{r.order:>6}{r.wmsfe:>10.3f}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="micvar", description="VAR lag-order selection with MIC, AIC, BIC and HQ")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="choose a lag order for a CSV series")
    _add_data_args(p)
    p.add_argument("--out", "-o", help="JSON output path (default: stdout)")
    p.add_argument("--dump-fits", metavar="PATH", help="write every per-order fit as JSON")
    p.add_argument("--emit-plot-data", metavar="DIR", help="write (p, score) CSVs per criterion")
    p.add_argument("--quiet", "-q", action="store_true")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("simulate", help="simulate a VAR process to CSV")
    p.add_argument("--spec", help="process JSON (lag_matrices + noise)")
    p.add_argument("--setting", help="named setting, e.g. AR2, VAR2_2, VAR10_3, VAR3_2_SWITCH")
    p.add_argument("--noise", default="diag", choices=["diag", "nondiag", "mixture"])
    p.add_argument("--process-seed", type=int, default=0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="run a Monte Carlo accuracy experiment")
    p.add_argument("--config", "-c", required=True, help="config JSON path or bundled name (e.g. ar2_small)")
    p.add_argument("--out", "-o", help="tidy CSV output (default: stdout)")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: MICVAR_THREADS or CPU count)")
    p.add_argument("--B", type=int, default=None, help="override the replicate count")
    p.add_argument("--emit-plot-data", metavar="DIR")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("forecast", help="rolling-window one-step forecast comparison (wMSFE)")
    _add_data_args(p)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--out", "-o", help="JSON report path (default: stdout)")
    p.add_argument("--errors-csv", metavar="PATH", help="per-point errors CSV")
    p.add_argument("--quiet", "-q", action="store_true")
    p.set_defaults(func=cmd_forecast)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
