"""Command line interface: fit, cv, sample, simulate, export.

Report-producing commands write delimited/JSON primary outputs and, unless
--no-figures is given, render a matching figure next to them.  Identical
inputs, flags and seeds produce byte-identical output files.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import plots
from .errors import MixedMrfError
from .experiments import run_recovery_experiment, write_report_csv
from .io import (
    export_network,
    load_dataset,
    load_theta_with_names,
    save_dataset,
    save_theta,
    save_theta_matrix_csv,
)
from .optimizer import FitConfig, fit
from .sampler import ChainConfig, gibbs_chain
from .selection import cross_validate, default_lambda_grid

_POLICIES = ("fixed", "adaptive-doubling")


def _default_threads() -> int:
    return os.cpu_count() or 1


def _fig_path(path: str) -> str:
    base, _ = os.path.splitext(path)
    return base + ".png"


def _add_fit_options(sub) -> None:
    sub.add_argument("--tau", type=float, default=1e-10, help="gradient-norm stopping threshold")
    sub.add_argument("--alpha", type=float, default=None,
                     help="step multiplier (default: p for fixed, 3 for adaptive)")
    sub.add_argument("--alpha-policy", choices=_POLICIES, default="fixed")
    sub.add_argument("--max-iter", type=int, default=None)


def _fit_config(args, lam: float) -> FitConfig:
    return FitConfig(
        lam=lam,
        tau=args.tau,
        alpha0=args.alpha,
        alpha_policy=args.alpha_policy,
        max_iterations=args.max_iter,
    )


def _cmd_fit(args) -> int:
    data = load_dataset(args.data)
    result = fit(data, _fit_config(args, args.lambda_), workers=args.threads)
    save_theta(result.theta_hat, args.out, names=data.column_names())
    if args.heatmap:
        save_theta_matrix_csv(result.theta_hat, args.heatmap)
        if not args.no_figures:
            plots.save_heatmap(result.theta_hat, _fig_path(args.heatmap),
                               names=data.column_names())
    last = result.error_trace[-1] if result.error_trace else float("nan")
    print(
        f"fit: iterations={result.iterations} converged={result.converged} "
        f"final_error={last:.6e} -> {args.out}"
    )
    return 0


def _cmd_cv(args) -> int:
    data = load_dataset(args.data)
    grid = default_lambda_grid(args.grid_points, args.grid_min, args.grid_max)
    cv = cross_validate(data, grid, args.k_folds, args.seed,
                        _fit_config(args, 0.0), workers=args.threads)
    import json

    doc = {
        "lambda_grid": list(cv.lambda_grid),
        "mean_mspe": list(cv.mean_mspe),
        "sd_mspe": list(cv.sd_mspe),
        "lambda_opt": cv.lambda_opt,
        "folds": cv.folds,
        "seed": cv.seed,
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.curve:
        lines = ["lambda,mean_mspe,sd_mspe"]
        for lam, m, s in zip(cv.lambda_grid, cv.mean_mspe, cv.sd_mspe):
            lines.append(f"{lam!r},{m!r},{s!r}")
        with open(args.curve, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        if not args.no_figures:
            plots.save_cv_curve(cv, _fig_path(args.curve))
    print(f"cv: lambda_opt={cv.lambda_opt!r} -> {args.out}")
    return 0


def _cmd_sample(args) -> int:
    theta, names = load_theta_with_names(args.theta)
    config = ChainConfig(
        n_samples=args.n, burn_in=args.burn_in, thinning=args.thin, seed=args.seed
    )
    data = gibbs_chain(theta, config)
    if names is not None:
        from .model import MixedDataset

        data = MixedDataset(data.values, data.families, names)
    save_dataset(data, args.out)
    print(f"sample: n={data.n} p={data.p} -> {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    estimators = tuple(e.strip() for e in args.estimators.split(",") if e.strip())
    report = run_recovery_experiment(
        sizes,
        args.replicates,
        estimators=estimators,
        seed=args.seed,
        experiment=args.experiment,
        workers=args.threads,
    )
    write_report_csv(report, args.out)
    if not args.no_figures:
        plots.save_error_curves(report, _fig_path(args.out))
    for name in report.estimators:
        for n in report.sample_sizes:
            errs = report.errors(name, n)
            if errs:
                print(f"simulate: {name} n={n} mean_error={np.mean(errs):.4f} "
                      f"({len(errs)} replicates)")
    failures = [c for c in report.cells if c.failure]
    for c in failures:
        print(f"simulate: {c.estimator} n={c.n} rep={c.replicate} FAILED: {c.failure}",
              file=sys.stderr)
    print(f"simulate: report -> {args.out}")
    return 0


def _cmd_export(args) -> int:
    theta, names = load_theta_with_names(args.theta)
    n_offdiag = theta.p * (theta.p - 1) // 2
    if args.top_k is not None:
        k = args.top_k
    elif args.top_frac is not None:
        k = int(round(args.top_frac * n_offdiag))
    else:
        k = n_offdiag
    export_network(theta, k, args.format, args.out, names=names)
    print(f"export: {k} edges ({args.format}) -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixedmrf",
        description="Ridge pseudo-likelihood estimation of mixed-type Markov random fields",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="estimate the parameter matrix from a dataset")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--lambda", dest="lambda_", type=float, default=0.0,
                       help="ridge penalty weight")
    _add_fit_options(p_fit)
    p_fit.add_argument("--threads", type=int, default=_default_threads())
    p_fit.add_argument("--out", required=True, help="output parameter JSON")
    p_fit.add_argument("--heatmap", default=None,
                       help="also write the estimate as a plain matrix CSV (+ PNG)")
    p_fit.add_argument("--no-figures", action="store_true")
    p_fit.set_defaults(func=_cmd_fit)

    p_cv = sub.add_parser("cv", help="select the ridge penalty by cross-validation")
    p_cv.add_argument("--data", required=True)
    p_cv.add_argument("--k-folds", type=int, default=10)
    p_cv.add_argument("--grid-min", type=float, default=1e-10)
    p_cv.add_argument("--grid-max", type=float, default=1e2)
    p_cv.add_argument("--grid-points", type=int, default=50)
    p_cv.add_argument("--seed", type=int, default=0)
    _add_fit_options(p_cv)
    p_cv.add_argument("--threads", type=int, default=_default_threads())
    p_cv.add_argument("--out", required=True, help="output CV result JSON")
    p_cv.add_argument("--curve", default=None,
                      help="also write the CV curve as CSV (+ PNG)")
    p_cv.add_argument("--no-figures", action="store_true")
    p_cv.set_defaults(func=_cmd_cv)

    p_sample = sub.add_parser("sample", help="draw a dataset by Gibbs sampling")
    p_sample.add_argument("--theta", required=True, help="parameter JSON file")
    p_sample.add_argument("--n", type=int, required=True)
    p_sample.add_argument("--burn-in", type=int, default=5000)
    p_sample.add_argument("--thin", type=int, default=500)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--out", required=True, help="output dataset CSV")
    p_sample.set_defaults(func=_cmd_sample)

    p_sim = sub.add_parser("simulate", help="run a synthetic recovery experiment")
    p_sim.add_argument("--experiment", choices=("lattice", "ggm"), default="lattice")
    p_sim.add_argument("--sizes", default="100", help="comma-separated sample sizes")
    p_sim.add_argument("--replicates", type=int, default=3)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--estimators", default="ridge,unpenalized,nodewise")
    p_sim.add_argument("--threads", type=int, default=_default_threads())
    p_sim.add_argument("--out", required=True, help="output report CSV")
    p_sim.add_argument("--no-figures", action="store_true")
    p_sim.set_defaults(func=_cmd_simulate)

    p_exp = sub.add_parser("export", help="export the top-k network")
    p_exp.add_argument("--theta", required=True)
    group = p_exp.add_mutually_exclusive_group()
    group.add_argument("--top-k", type=int, default=None)
    group.add_argument("--top-frac", type=float, default=None)
    p_exp.add_argument("--format", choices=("dot", "graphml", "json"), default="dot")
    p_exp.add_argument("--out", required=True)
    p_exp.set_defaults(func=_cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MixedMrfError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
