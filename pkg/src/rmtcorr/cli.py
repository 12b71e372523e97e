"""Command line entry point: ``rmtcorr run|validate|law|spectrum``.

Exit codes: 0 success, 1 error (bad config, solver failure), 2 a declared
band or check was violated.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import ConvergenceError, InfeasibleMomentsError
from .estimators import DEFAULT_ELL, estimate_correlation_moments, read_data_csv, reconstruct_spectrum
from .experiments import (
    ConfigError,
    default_jobs,
    load_config,
    preflight,
    run_experiment,
    write_rows_csv,
    write_summary_json,
)
from .lsd import AtomicMeasure, law_from_stieltjes, mp_law, semicircle_law

EXIT_OK, EXIT_ERROR, EXIT_BAND = 0, 1, 2


def _out_paths(out: str) -> tuple[str, str]:
    base = os.path.splitext(out)[0] if out.endswith((".csv", ".json")) else out
    return base + ".csv", base + ".json"


def _cmd_run(args) -> int:
    cfg = load_config(args.config, args.set)
    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs < 1:
        raise ConfigError("--jobs", "must be >= 1")
    csv_path, json_path = _out_paths(args.out or cfg.out or cfg.experiment)
    for path in (csv_path, json_path):
        if os.path.abspath(path) == os.path.abspath(args.config):
            raise ConfigError("--out", f"output {path} would overwrite the config file")
    result = run_experiment(cfg, jobs=jobs)
    write_rows_csv(result, csv_path, timing=args.timing)
    write_summary_json(result, json_path)
    for c in result.summary["checks"]:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"{status} {c['name']}: {c['value']:.6g} in [{c['lo']:.6g}, {c['hi']:.6g}]")
    failed = result.summary["failed_reps"]
    if failed:
        print(f"{len(failed)} of {cfg.reps} replications failed: {failed}", file=sys.stderr)
    print(f"wrote {csv_path} and {json_path}")
    if len(failed) == cfg.reps:
        return EXIT_ERROR
    return EXIT_OK if result.passed else EXIT_BAND


def _cmd_validate(args) -> int:
    cfg = load_config(args.config, args.set)
    cols = preflight(cfg)
    print(f"ok: {cfg.experiment}, p={cfg.model.p}, n={cfg.model.n}, reps={cfg.reps}; columns: {','.join(cols)}")
    return EXIT_OK


def _parse_atoms(text: str) -> AtomicMeasure:
    """``t:w,t:w`` or a JSON file holding ``[[t, w], ...]``."""
    if os.path.exists(text):
        with open(text) as fh:
            data = json.load(fh)
        if isinstance(data, dict):
            data = data.get("H", data.get("atoms"))
        return AtomicMeasure.from_pairs(data)
    pairs = []
    for item in text.split(","):
        t, _, w = item.partition(":")
        pairs.append((float(t), float(w) if w else np.nan))
    arr = np.array(pairs)
    if np.isnan(arr[:, 1]).all():
        arr[:, 1] = 1.0 / len(arr)
    return AtomicMeasure(arr[:, 0], arr[:, 1])


def _cmd_law(args) -> int:
    H = _parse_atoms(args.H) if args.H else None
    x_range = tuple(args.x_range) if args.x_range else None
    if args.kind == "mp" and args.method == "closed":
        law = mp_law(args.gamma, num=args.num)
    elif args.kind == "semicircle" and args.method == "closed":
        law = semicircle_law(num=args.num)
    else:
        law = law_from_stieltjes(args.kind, args.gamma, H, x_range=x_range, num=args.num, eta=args.eta)
    out = args.out or f"law_{args.kind}.csv"
    law.to_csv(out)
    print(f"total mass {law.total_mass:.6f}, support [{law.support[0]:.6g}, {law.support[1]:.6g}]; wrote {out}")
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    X = read_data_csv(args.data)
    mv = estimate_correlation_moments(X, args.ell)
    est = reconstruct_spectrum(mv, strict=not args.project)
    out = args.out or "spectrum.csv"
    est.meta["moments"] = [float(v) for v in mv.as_array()]
    est.to_csv(out)
    print(f"p={mv.p}, ell={mv.ell}, trace residual {est.trace_residual:.3e}; wrote {out} and {out}.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rmtcorr", description="Sample correlation matrix experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_config(sp):
        sp.add_argument("config", help="experiment config (JSON)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, dotted keys allowed (repeatable)")

    run = sub.add_parser("run", help="run an experiment")
    add_config(run)
    run.add_argument("--jobs", type=int, default=None, help="worker processes (default: $RMT_CORR_JOBS or cores)")
    run.add_argument("--out", help="output base path; writes BASE.csv and BASE.json")
    run.add_argument("--timing", action="store_true", help="add a wall_time column to the CSV")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check a config without running it")
    add_config(val)
    val.set_defaults(func=_cmd_validate)

    law = sub.add_parser("law", help="export a limiting spectral density")
    law.add_argument("--kind", choices=["mp", "semicircle", "general", "general_zero_gamma"], required=True)
    law.add_argument("--gamma", type=float, default=None)
    law.add_argument("--H", help="atoms as t:w,t:w or a JSON file [[t, w], ...]")
    law.add_argument("--method", choices=["closed", "inversion"], default="closed",
                     help="closed forms for mp/semicircle, or Stieltjes inversion")
    law.add_argument("--num", type=int, default=2001)
    law.add_argument("--eta", type=float, default=1e-4)
    law.add_argument("--x-range", type=float, nargs=2, metavar=("LO", "HI"))
    law.add_argument("--out", help="CSV path")
    law.set_defaults(func=_cmd_law)

    spec = sub.add_parser("spectrum", help="estimate the correlation spectrum of a p x n CSV data matrix")
    spec.add_argument("data")
    spec.add_argument("--ell", type=int, default=DEFAULT_ELL)
    spec.add_argument("--project", action="store_true",
                      help="fit infeasible moments by projection instead of failing")
    spec.add_argument("--out", help="CSV path")
    spec.set_defaults(func=_cmd_spectrum)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except (ConvergenceError, InfeasibleMomentsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
