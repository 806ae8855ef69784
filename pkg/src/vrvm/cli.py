"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure,
4 fit stopped at max_iter without converging.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ._linalg import NumericalError
from .classification import fit_classification
from .datasets import (
    CVFoldError,
    DatasetError,
    cross_validate_width,
    gen_sinc,
    gen_two_class,
    load_csv,
    load_table,
    sinc,
    write_csv,
)
from .io import ModelFormatError, load_model, save_model
from .kernels import KernelSpec
from .regression import FitConfig, FitError, RegressionModel, fit_regression, relevance_vectors
from .special import HyperpriorConfig, marginal_prior_curve

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3
EXIT_NOT_CONVERGED = 4

TASK_NAMES = {"regress": "regression", "classify": "classification"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _emit(rows, header, out):
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    finally:
        if out:
            fh.close()


# -- shared option groups ---------------------------------------------------

def _add_data_opts(p):
    p.add_argument("--data", required=True, help="CSV dataset")
    p.add_argument("--target-col", type=int, default=-1, help="target column index (default: last)")
    p.add_argument("--no-header", action="store_true", help="CSV has no header row")


def _add_model_opts(p, width_required=False):
    p.add_argument("--kernel", choices=("gaussian", "polynomial", "linear"), default="gaussian")
    if not width_required:
        p.add_argument("--width", type=float, default=1.0, help="gaussian width r")
    p.add_argument("--degree", type=int, default=3, help="polynomial degree")
    p.add_argument("--convention", choices=("r2", "2r2"), default="r2",
                   help="gaussian exponent: r2 = -d^2/r^2, 2r2 = -d^2/(2 r^2)")
    p.add_argument("--no-bias", action="store_true")
    p.add_argument("--standardize", action="store_true", help="standardize features before the kernel")
    for name in "abcd":
        p.add_argument(f"--{name}", type=float, default=1e-6, help=f"hyperprior {name}")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--param-tol", type=float, default=None)
    p.add_argument("--threshold", type=float, default=1e-3, help="relevance threshold on |mean weight|")
    p.add_argument("--tau-shape", choices=("exact", "n_plus_one"), default="exact")
    p.add_argument("--seed", type=int, default=0)


def _kernel(args, width=None) -> KernelSpec:
    return KernelSpec(kind=args.kernel, width=width if width is not None else args.width,
                      degree=args.degree, include_bias=not args.no_bias, convention=args.convention)


def _hyperprior(args) -> HyperpriorConfig:
    return HyperpriorConfig(args.a, args.b, args.c, args.d)


def _settings(args, width=None):
    """Kernel, hyperprior and loop config from flags; bad values are usage errors."""
    try:
        return _kernel(args, width), _hyperprior(args), _config(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config(args) -> FitConfig:
    return FitConfig(tol=args.tol, max_iter=args.max_iter, relevance_threshold=args.threshold,
                     tau_shape=args.tau_shape, standardize=args.standardize, param_tol=args.param_tol)


def _load(args, task):
    return load_csv(args.data, target_column=args.target_col, has_header=not args.no_header, task=task)


def _fit(task, data, kernel, hp, config, seed):
    fit = fit_regression if task == "regression" else fit_classification
    model, report = fit(data.X, data.t, kernel, hp, config)
    model.meta["seed"] = seed
    model.meta["relevance_threshold"] = config.relevance_threshold
    return model, report


def _write_report(path, model, report, task):
    idx, count = relevance_vectors(model, model.meta.get("relevance_threshold", 1e-3))
    lines = [
        f"task={task}",
        f"iterations={report.n_iterations}",
        f"converged={_fmt(report.converged)}",
        f"final_elbo={_fmt(report.elbo_trace[-1])}",
        f"relevance_count={count}",
        "relevance_indices=" + " ".join(str(int(i)) for i in idx),
    ]
    if report.noise_std_estimate is not None:
        lines.append(f"noise_std={_fmt(report.noise_std_estimate)}")
    lines += [f"elbo_{k}={_fmt(v)}" for k, v in enumerate(report.elbo_trace, start=1)]
    Path(path).write_text("\n".join(lines) + "\n")


# -- commands ---------------------------------------------------------------

def cmd_gen(args) -> int:
    try:
        if args.which == "sinc":
            ds = gen_sinc(args.n, args.noise, args.seed, args.spacing)
        else:
            ds = gen_two_class(args.n, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_csv(ds, args.out)
    print(f"rows={len(ds)}")
    print(f"out={args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    task = TASK_NAMES[args.task]
    kernel, hp, config = _settings(args)
    data = _load(args, task)
    model_path = Path(args.model)
    report_path = Path(args.report) if args.report else model_path.with_suffix(".report.txt")
    try:
        model, report = _fit(task, data, kernel, hp, config, args.seed)
    except FitError as exc:
        lines = [f"error={exc}"] + [f"elbo_{k}={_fmt(v)}" for k, v in enumerate(exc.elbo_trace, start=1)]
        report_path.write_text("\n".join(lines) + "\n")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    save_model(model, model_path)
    _write_report(report_path, model, report, task)
    idx, count = relevance_vectors(model, args.threshold)
    print(f"iterations={report.n_iterations}")
    print(f"converged={_fmt(report.converged)}")
    print(f"final_elbo={_fmt(report.elbo_trace[-1])}")
    print(f"relevance_count={count}")
    if report.noise_std_estimate is not None:
        print(f"noise_std={_fmt(report.noise_std_estimate)}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _prediction_inputs(model, path, target_col, no_header):
    """Feature rows from a CSV that may or may not carry a target column."""
    table = load_table(path, has_header=not no_header)
    d = model.centres.shape[1]
    if table.shape[1] == d:
        return table
    if table.shape[1] == d + 1:
        return np.delete(table, target_col, axis=1)
    raise ValueError(f"data has {table.shape[1]} columns; model expects {d} features "
                     f"(optionally plus a target column)")


def cmd_predict(args) -> int:
    model = load_model(args.model)
    X = _prediction_inputs(model, args.data, args.target_col, args.no_header)
    if isinstance(model, RegressionModel):
        mean, var = model.predict(X)
        _emit(zip(mean, var), ["mean", "variance"], args.out)
    else:
        p = model.predict_proba(X, args.method)
        _emit(((pi, int(pi >= 0.5)) for pi in p), ["probability", "label"], args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    data = load_csv(args.data, target_column=args.target_col, has_header=not args.no_header,
                    task=model.task)
    if data.X.shape[1] != model.centres.shape[1]:
        raise ValueError(f"data has {data.X.shape[1]} features; model expects {model.centres.shape[1]}")
    _, count = relevance_vectors(model, model.meta.get("relevance_threshold", 1e-3))
    if isinstance(model, RegressionModel):
        mean, _ = model.predict(data.X)
        print(f"rmse={_fmt(float(np.sqrt(np.mean((mean - data.t) ** 2))))}")
        if data.provenance.get("generator") == "sinc":
            truth = sinc(data.X[:, 0])
            print(f"rmse_true={_fmt(float(np.sqrt(np.mean((mean - truth) ** 2))))}")
        print(f"relevance_count={count}")
        print(f"noise_std={_fmt(model.noise_std)}")
    else:
        labels = model.predict(data.X, args.method)
        print(f"error_pct={_fmt(100.0 * float(np.mean(labels != data.t)))}")
        print(f"errors={int(np.sum(labels != data.t))}")
        print(f"relevance_count={count}")
    return EXIT_OK


def cmd_cv(args) -> int:
    task = TASK_NAMES[args.task]
    kernel, hp, config = _settings(args, 1.0)
    data = _load(args, task)
    try:
        widths = [float(w) for w in args.widths.split(",") if w.strip()]
    except ValueError:
        raise UsageError(f"bad --widths {args.widths!r}") from None
    if not widths:
        raise UsageError("--widths is empty")
    if any(w <= 0 for w in widths) or args.k < 2:
        raise UsageError("widths must be positive and --k at least 2")
    res = cross_validate_width(data, widths, args.k, args.seed, task, kernel, hp, config, n_jobs=args.jobs)
    score = "rmse" if task == "regression" else "error_rate"
    print(f"width,mean_{score}")
    for w, s in zip(res.widths, res.mean_scores):
        print(f"{_fmt(w)},{_fmt(s)}")
    print(f"best_width={_fmt(res.best_width)}")
    if args.model_out:
        model, report = _fit(task, data, replace(kernel, width=res.best_width), hp, config, args.seed)
        model.meta["cv"] = {"widths": res.widths, "mean_scores": res.mean_scores, "k": args.k}
        save_model(model, args.model_out)
        _write_report(Path(args.model_out).with_suffix(".report.txt"), model, report, task)
    return EXIT_OK


def cmd_plotdata(args) -> int:
    kind = args.kind
    if kind == "marginal-prior":
        rows = marginal_prior_curve(args.wmax, args.npoints, args.a, args.b, args.lam)
        _emit(rows, ["w", "marginal", "laplace"], args.out)
        return EXIT_OK
    if not args.model:
        raise UsageError(f"plotdata {kind} requires --model")
    model = load_model(args.model)
    post = model.posterior
    mean_w = post.mu_w if isinstance(model, RegressionModel) else post.m
    if kind == "elbo":
        trace = model.meta.get("elbo_trace", [])
        _emit(((i, v) for i, v in enumerate(trace, start=1)), ["sweep", "elbo"], args.out)
    elif kind == "weights":
        _emit(((i, w) for i, w in enumerate(mean_w)), ["index", "mean_weight"], args.out)
    elif kind == "alpha-hist":
        alpha = post.a_tilde / post.b_tilde
        _emit(((i, a) for i, a in enumerate(alpha)), ["index", "alpha_mean"], args.out)
    elif kind == "fit-curve":
        if not isinstance(model, RegressionModel) or model.centres.shape[1] != 1:
            raise UsageError("fit-curve needs a regression model with 1-D inputs")
        lo = args.xmin if args.xmin is not None else float(model.centres.min())
        hi = args.xmax if args.xmax is not None else float(model.centres.max())
        grid = np.linspace(lo, hi, args.npoints)
        mean, var = model.predict(grid)
        idx, _ = relevance_vectors(model, model.meta.get("relevance_threshold", 1e-3))
        offset = 1 if model.kernel.include_bias else 0
        rv_x = model.centres[idx - offset, 0]
        rv_mean, rv_var = model.predict(rv_x) if len(rv_x) else (np.zeros(0), np.zeros(0))
        rows = [("curve", x, m, math.sqrt(v)) for x, m, v in zip(grid, mean, var)]
        rows += [("relevance_vector", x, m, math.sqrt(v)) for x, m, v in zip(rv_x, rv_mean, rv_var)]
        _emit(rows, ["kind", "x", "mean", "sd"], args.out)
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vrvm", description="Variational relevance vector machine")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("which", choices=("sinc", "twoclass"))
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--noise", type=float, default=0.1, help="sinc noise sd")
    g.add_argument("--spacing", choices=("uniform_random", "equispaced"), default="uniform_random")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit", help="fit a model")
    f.add_argument("task", choices=tuple(TASK_NAMES))
    _add_data_opts(f)
    _add_model_opts(f)
    f.add_argument("--model", required=True, help="output model file")
    f.add_argument("--report", default=None, help="output report (default: <model>.report.txt)")
    f.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model", required=True)
    _add_data_opts(p)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.add_argument("--method", choices=("mackay", "mean_plugin"), default="mackay")
    p.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", help="evaluate a saved model on labelled data")
    e.add_argument("--model", required=True)
    _add_data_opts(e)
    e.add_argument("--method", choices=("mackay", "mean_plugin"), default="mackay")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("cv", help="k-fold selection of the gaussian width")
    c.add_argument("task", choices=tuple(TASK_NAMES))
    _add_data_opts(c)
    _add_model_opts(c, width_required=True)
    c.add_argument("--widths", default="0.5,1,2,3,5,8")
    c.add_argument("--k", type=int, default=5)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--model-out", default=None, help="also fit and save the winning model")
    c.set_defaults(func=cmd_cv)

    pd = sub.add_parser("plotdata", help="emit plot-ready CSV")
    pd.add_argument("kind", choices=("elbo", "fit-curve", "weights", "alpha-hist", "marginal-prior"))
    pd.add_argument("--model", default=None)
    pd.add_argument("--out", default=None, help="output CSV (default: stdout)")
    pd.add_argument("--xmin", type=float, default=None)
    pd.add_argument("--xmax", type=float, default=None)
    pd.add_argument("--npoints", type=int, default=201)
    pd.add_argument("--a", type=float, default=1.0, help="marginal-prior Gamma shape")
    pd.add_argument("--b", type=float, default=1.0, help="marginal-prior Gamma rate")
    pd.add_argument("--lam", type=float, default=1.0, help="Laplace rate for comparison")
    pd.add_argument("--wmax", type=float, default=5.0)
    pd.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen" and args.n is None:
        args.n = 50 if args.which == "sinc" else 100
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"vrvm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CVFoldError as exc:
        print(f"vrvm: cross-validation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc.__cause__, NumericalError) else EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"vrvm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DatasetError, ModelFormatError, ValueError, OSError) as exc:
        print(f"vrvm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
