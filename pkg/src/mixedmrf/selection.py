"""Penalty selection by k-fold cross-validation over a ridge grid.

Every candidate lambda is scored with the mean squared prediction error
(MSPE): each held-out cell is predicted by its node-conditional mean given the
observed other variates, the squared differences are averaged over cells, and
fold scores are averaged per lambda.  Folds are a seeded uniform shuffle and
identical across the whole grid, so the CV curve is a deterministic function
of (data, grid, k, seed, fit settings).

Per fold, fits traverse the grid in ascending order and warm-start from the
previous solution; the first fit of every fold warm-starts from a single
pre-pass fit at the smallest lambda on the full data.  Warm starts only change
the optimization path, never the (unique, tau-converged) optimum.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError
from .model import MixedDataset, ParamMatrix
from .optimizer import FitConfig, FitResult, fit
from .pseudolikelihood import PenaltyConfig, _Engine

DEFAULT_GRID_MIN = 1e-10
DEFAULT_GRID_MAX = 1e2
DEFAULT_GRID_POINTS = 50


@dataclass(frozen=True)
class CvResult:
    """CV curve, the selected penalty, and fit bookkeeping."""

    lambda_grid: tuple[float, ...]
    mean_mspe: tuple[float, ...]
    sd_mspe: tuple[float, ...]
    lambda_opt: float
    folds: int
    seed: int
    max_fit_iterations: int
    all_converged: bool


def default_lambda_grid(
    num: int = DEFAULT_GRID_POINTS,
    lo: float = DEFAULT_GRID_MIN,
    hi: float = DEFAULT_GRID_MAX,
) -> np.ndarray:
    """Log-spaced penalty grid, ascending."""
    if num < 1:
        raise ParameterError(f"grid needs at least one point, got {num}")
    if not (0 < lo <= hi):
        raise ParameterError(f"grid bounds must satisfy 0 < lo <= hi, got [{lo}, {hi}]")
    if num == 1:
        return np.asarray([lo])
    return np.geomspace(lo, hi, num)


def fold_split(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Partition {0..n-1} into k disjoint folds of near-equal size."""
    if k < 2 or k > n:
        raise ParameterError(f"fold count must satisfy 2 <= k <= n, got k = {k}, n = {n}")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    order = rng.permutation(n)
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    folds = []
    start = 0
    for size in sizes:
        folds.append(np.sort(order[start : start + size]))
        start += size
    return folds


def mspe(theta: ParamMatrix, test: MixedDataset) -> float:
    """Mean squared error of node-conditional mean predictions on test data."""
    if theta.p != test.p or theta.families != test.families:
        raise ValueError("parameter matrix and test data disagree on variates")
    engine = _Engine(test, PenaltyConfig())
    _, mu, _ = engine.parts(theta.entries)
    diff = test.values - mu
    return float(np.mean(diff * diff))


def cross_validate(
    data: MixedDataset,
    grid: Sequence[float],
    k: int,
    seed: int,
    fit_config: Optional[FitConfig] = None,
    workers: int = 1,
) -> CvResult:
    """Score every lambda on k shared folds and pick the MSPE minimizer.

    Ties select the smallest lambda.  Any fold fit failure propagates with
    (lambda, fold) context.
    """
    lams = np.asarray(sorted(float(v) for v in grid))
    if lams.size == 0:
        raise ParameterError("lambda grid must be non-empty")
    if np.any(lams <= 0):
        raise ParameterError("lambda grid entries must be positive")
    base = fit_config if fit_config is not None else FitConfig()
    folds = fold_split(data.n, k, seed)
    all_idx = np.arange(data.n)

    iter_counts: list[int] = []
    conv_flags: list[bool] = []

    prepass = fit(data, replace(base, lam=float(lams[0])))
    iter_counts.append(prepass.iterations)
    conv_flags.append(prepass.converged)

    def run_fold(f: int) -> tuple[list[float], list[tuple[int, bool]]]:
        test_idx = folds[f]
        train_idx = np.setdiff1d(all_idx, test_idx, assume_unique=True)
        train = MixedDataset(data.values[train_idx], data.families)
        test = MixedDataset(data.values[test_idx], data.families)
        scores = []
        records = []
        warm = prepass.theta_hat
        for lam in lams:
            try:
                res = fit(train, replace(base, lam=float(lam), initial_theta=warm))
            except Exception as exc:
                exc.args = (f"fold {f}, lambda {lam!r}: {exc}",)
                raise
            warm = res.theta_hat
            records.append((res.iterations, res.converged))
            scores.append(mspe(res.theta_hat, test))
        return scores, records

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_fold, range(k)))
    else:
        results = [run_fold(f) for f in range(k)]
    for _, records in results:
        for iters, conv in records:
            iter_counts.append(iters)
            conv_flags.append(conv)

    scores = np.asarray([s for s, _ in results])  # k x len(grid)
    mean = scores.mean(axis=0)
    sd = scores.std(axis=0, ddof=1)
    opt_idx = int(np.argmin(mean))
    return CvResult(
        lambda_grid=tuple(float(v) for v in lams),
        mean_mspe=tuple(float(v) for v in mean),
        sd_mspe=tuple(float(v) for v in sd),
        lambda_opt=float(lams[opt_idx]),
        folds=k,
        seed=int(seed),
        max_fit_iterations=max(iter_counts),
        all_converged=all(conv_flags),
    )
