"""Command-line front end.

Subcommands: fit, cv, predict, nested-loocv, simulate-table, simulate-dd,
risk-curve. Exit codes: 0 success, 1 invalid input, 2 numerical failure.
Randomized commands require --seed; grid flags accept start:stop:step ranges
(inclusive endpoints). Every output file records the tool version, the
command line, and the seed.
"""

from __future__ import annotations

import argparse
import os
import shlex
import sys

import numpy as np

from . import __version__
from .data import load_matrix_csv, prepare_dataset
from .errors import NumericalError, ValidationError
from .estimators import (
    RIDGELESS_LAMBDA,
    EnvelopeDesign,
    fit_envelope,
    load_model,
    predict,
    save_model,
)
from .risk import risk_curve_rows, write_risk_curve
from .selection import (
    ESTIMATOR_KINDS,
    default_lambda_grid,
    kfold_cv,
    nested_loocv,
    scaled_lambda_grid,
    write_cv_table,
)
from .simulate import run_double_descent_sweep, run_risk_table


class _CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with its own codes; route everything through _CLIError
    # so main() can keep the 0/1/2 contract.
    def error(self, message):
        raise _CLIError(message)


def parse_range(text: str, kind=float) -> np.ndarray:
    """start:stop:step (inclusive) or a comma list; single values allowed."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError("expected start:stop:step")
            start, stop, step = (float(t) for t in parts)
            if step <= 0 or stop < start:
                raise ValueError("need step > 0 and stop >= start")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = start + step * np.arange(count)
        else:
            values = np.array([float(t) for t in text.split(",") if t.strip()])
            if values.size == 0:
                raise ValueError("empty list")
    except ValueError as exc:
        raise _CLIError(f"could not parse range {text!r}: {exc}") from None
    if kind is int:
        rounded = np.round(values)
        if np.any(np.abs(values - rounded) > 1e-9):
            raise _CLIError(f"range {text!r} must hold integers")
        return rounded.astype(int)
    return values


def _provenance(args_ns, argv) -> str:
    seed = getattr(args_ns, "seed", None)
    cmd = shlex.join(["respenv"] + list(argv))
    return f"respenv {__version__} | command: {cmd} | seed: {seed if seed is not None else '-'}"


def _provenance_dict(args_ns, argv) -> dict:
    return {
        "version": __version__,
        "command": shlex.join(["respenv"] + list(argv)),
        "seed": getattr(args_ns, "seed", None),
    }


def _load_xy(args):
    X = load_matrix_csv(args.x, header=args.header)
    Y = load_matrix_csv(args.y, header=args.header)
    return X, Y


def _add_data_flags(p):
    p.add_argument("--x", required=True, help="predictor CSV (n rows, p columns)")
    p.add_argument("--y", required=True, help="response CSV (n rows, r columns)")
    p.add_argument("--header", action="store_true",
                   help="input CSVs carry a header row")
    p.add_argument("--no-standardize", action="store_true",
                   help="skip predictor column standardization")
    p.add_argument("--no-center-y", action="store_true",
                   help="skip response column centering")


def _add_lambda_grid_flags(p, default_count):
    p.add_argument("--lambda-count", type=int, default=default_count,
                   help="points in the tuning grid")
    p.add_argument("--lambda-log-min", type=float, default=-4.0)
    p.add_argument("--lambda-log-max", type=float, default=4.0)
    p.add_argument("--lambda-grid", default=None,
                   help="explicit grid (comma list or start:stop:step), "
                        "overrides the scaled default")


def _resolve_lambda_grid(args, source):
    if args.lambda_grid is not None:
        return parse_range(args.lambda_grid)
    return scaled_lambda_grid(source, count=args.lambda_count,
                              log10_min=args.lambda_log_min,
                              log10_max=args.lambda_log_max)


def _default_threads():
    return max(1, os.cpu_count() or 1)


def build_parser() -> _Parser:
    parser = _Parser(prog="respenv", description=__doc__)
    parser.add_argument("--version", action="version",
                        version=f"respenv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one envelope model")
    _add_data_flags(p)
    p.add_argument("--u", type=int, required=True, help="material dimension")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--lambda", dest="lam", type=float,
                       help="regularization level (> 0)")
    group.add_argument("--ridgeless", action="store_true",
                       help=f"vanishing regularization (lambda={RIDGELESS_LAMBDA})")
    p.add_argument("--seed", type=int, default=None,
                   help="seed for extra optimizer starts (optional)")
    p.add_argument("--n-starts", type=int, default=2)
    p.add_argument("--out", required=True, help="output model JSON path")

    p = sub.add_parser("cv", help="k-fold cross-validation over (u, lambda)")
    _add_data_flags(p)
    p.add_argument("--u-grid", required=True,
                   help="dimensions to score (range or comma list)")
    _add_lambda_grid_flags(p, default_count=20)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--out", required=True, help="output CV table CSV path")

    p = sub.add_parser("predict", help="predict responses with a saved model")
    p.add_argument("--model", required=True, help="model JSON from `fit`")
    p.add_argument("--x", required=True, help="predictor CSV")
    p.add_argument("--header", action="store_true")
    p.add_argument("--out", required=True, help="output predictions CSV path")

    p = sub.add_parser("nested-loocv",
                       help="leave-one-out error with nested tuning")
    _add_data_flags(p)
    p.add_argument("--estimator", choices=ESTIMATOR_KINDS, default="enhanced")
    p.add_argument("--u-grid", default=None,
                   help="dimensions to tune over (default 0..r)")
    _add_lambda_grid_flags(p, default_count=20)
    p.add_argument("--inner-folds", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--out", default=None, help="optional output CSV path")

    p = sub.add_parser("simulate-table",
                       help="Monte Carlo estimator comparison at one (n, p, rho)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--estimators", default=",".join(ESTIMATOR_KINDS),
                   help="comma list from: " + ",".join(ESTIMATOR_KINDS))
    p.add_argument("--u", type=int, default=2)
    p.add_argument("--lambda-count", type=int, default=100)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--basis", choices=("haar", "identity"), default="haar")
    p.add_argument("--fixed-eta", action="store_true",
                   help="reuse one model draw across replications")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--out", required=True, help="output risk table CSV path")

    p = sub.add_parser("simulate-dd",
                       help="risk versus p/n sweep (ridgeless and lambda=p/n)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gamma", required=True,
                   help="p/n grid (range start:stop:step or comma list)")
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--basis", choices=("haar", "identity"), default="haar")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--out", required=True, help="output risk curve CSV path")

    p = sub.add_parser("risk-curve",
                       help="limiting risk formulas on a gamma grid")
    p.add_argument("--gamma", required=True,
                   help="gamma grid (range start:stop:step or comma list)")
    p.add_argument("--tr-omega", type=float, default=10.0)
    p.add_argument("--c2", type=float, default=10.0)
    p.add_argument("--out", required=True, help="output CSV path")

    return parser


def _cmd_fit(args, argv):
    X, Y = _load_xy(args)
    data = prepare_dataset(X, Y, standardize_x=not args.no_standardize,
                           center_y=not args.no_center_y)
    if args.u is None or not 0 <= args.u <= data.r:
        raise ValidationError(f"u must lie in [0, {data.r}]")
    lam = RIDGELESS_LAMBDA if args.ridgeless else args.lam
    if lam is None or lam <= 0:
        raise ValidationError("--lambda must be positive (or use --ridgeless)")
    fit = fit_envelope(data, args.u, lam, n_starts=args.n_starts, seed=args.seed)
    save_model(fit, args.out, provenance=_provenance_dict(args, argv))
    d = fit.diagnostics
    print(f"fit: u={fit.u} lambda={fit.lam:g} objective={d.objective_value:.6g} "
          f"iterations={d.iterations} converged={d.converged} -> {args.out}")
    return 0


def _cmd_cv(args, argv):
    X, Y = _load_xy(args)
    data = prepare_dataset(X, Y, standardize_x=not args.no_standardize,
                           center_y=not args.no_center_y)
    u_grid = parse_range(args.u_grid, kind=int)
    if np.any(u_grid < 0) or np.any(u_grid > data.r):
        raise ValidationError(f"u must lie in [0, {data.r}]")
    lam_grid = _resolve_lambda_grid(args, data)
    result = kfold_cv(data, u_grid, lam_grid, K=args.folds, seed=args.seed,
                      center_y=not args.no_center_y, threads=args.threads)
    write_cv_table(result, args.out, provenance=_provenance(args, argv))
    print(f"cv: best_u={result.best_u} best_lambda={result.best_lambda:.6g} "
          f"mean_error={result.mean_errors.min():.6g} -> {args.out}")
    return 0


def _cmd_predict(args, argv):
    fit = load_model(args.model)
    X = load_matrix_csv(args.x, header=args.header)
    Y_hat = predict(fit, X)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# {_provenance(args, argv)}\n")
        for row in Y_hat:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")
    print(f"predict: {Y_hat.shape[0]} rows -> {args.out}")
    return 0


def _cmd_nested_loocv(args, argv):
    X, Y = _load_xy(args)
    data = prepare_dataset(X, Y, standardize_x=False, center_y=False)
    u_grid = None if args.u_grid is None else parse_range(args.u_grid, kind=int)
    lam_grid = None if args.lambda_grid is None else parse_range(args.lambda_grid)
    error, per_obs = nested_loocv(
        data, u_grid=u_grid, lambda_grid=lam_grid, K_inner=args.inner_folds,
        estimator=args.estimator, seed=args.seed,
        center_y=not args.no_center_y, lambda_count=args.lambda_count,
        threads=args.threads, return_details=True,
    )
    print(f"nested-loocv [{args.estimator}]: error={error:.6g} (n={data.n})")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(f"# {_provenance(args, argv)}\n")
            fh.write("observation,squared_error\n")
            for i, e in enumerate(per_obs):
                fh.write(f"{i},{e:.17g}\n")
            fh.write(f"mean,{error:.17g}\n")
    return 0


def _cmd_simulate_table(args, argv):
    estimators = tuple(t.strip() for t in args.estimators.split(",") if t.strip())
    table = run_risk_table(
        n=args.n, p=args.p, rho=args.rho, reps=args.reps,
        estimators=estimators, u=args.u, lambda_count=args.lambda_count,
        folds=args.folds, seed=args.seed, regenerate_eta=not args.fixed_eta,
        basis_mode=args.basis, threads=args.threads,
    )
    table.to_csv(args.out, provenance=_provenance(args, argv))
    for row in table.rows:
        print(f"simulate-table: {row.estimator:9s} mean_risk={row.mean_risk:.4f} "
              f"se={row.se:.4f} (n={row.n}, p={row.p}, rho={row.rho:g})")
    print(f"simulate-table: -> {args.out}")
    return 0


def _cmd_simulate_dd(args, argv):
    gamma_grid = parse_range(args.gamma)
    table = run_double_descent_sweep(
        n=args.n, gamma_grid=gamma_grid, rho=args.rho, reps=args.reps,
        seed=args.seed, basis_mode=args.basis, threads=args.threads,
    )
    table.to_csv(args.out, provenance=_provenance(args, argv))
    print(f"simulate-dd: {len(gamma_grid)} gamma points x {args.reps} reps "
          f"-> {args.out}")
    return 0


def _cmd_risk_curve(args, argv):
    gamma_grid = parse_range(args.gamma)
    rows = risk_curve_rows(gamma_grid, args.tr_omega, args.c2)
    write_risk_curve(rows, args.out, provenance=_provenance(args, argv))
    print(f"risk-curve: {len(rows)} rows -> {args.out}")
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "cv": _cmd_cv,
    "predict": _cmd_predict,
    "nested-loocv": _cmd_nested_loocv,
    "simulate-table": _cmd_simulate_table,
    "simulate-dd": _cmd_simulate_dd,
    "risk-curve": _cmd_risk_curve,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args, argv)
    except _CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
