"""Parallel block coordinate Newton-Raphson maximizer of the penalized objective.

Each iteration computes, for every block j, the exact gradient and Hessian of
the penalized pseudo-log-likelihood restricted to that block at the current
iterate, takes one Newton step per block, embeds the p steps as zero-padded
vectors over the unique coordinates, sums them, scales the sum by 1/alpha and
adds it onto the iterate.  Iteration stops once the Euclidean norm of the full
gradient over the unique free coordinates drops to the threshold tau.

A multiplier alpha >= p guarantees convergence; the adaptive-doubling policy
starts smaller (default 3) and doubles alpha -- recomputing only the cheap
aggregation, never the block derivatives -- whenever the error norm fails to
decrease.  alpha is never reduced.

All p block computations within an iteration are independent read-only
consumers of the iterate and may run on a worker pool; aggregation happens
after a synchronization barrier in canonical block order, so the result is
bitwise identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DivergenceError, SingularBlockError
from .families import VariateFamily
from .model import MixedDataset, ParamMatrix
from .pseudolikelihood import (
    BlockDerivatives,
    PenaltyConfig,
    _Engine,
    _block_hessian,
    _eval_state,
    _free_row,
)

_ALPHA_POLICIES = ("fixed", "adaptive-doubling")
_MAX_DOUBLINGS_PER_ITERATION = 60


@dataclass(frozen=True)
class FitConfig:
    """Settings of one optimizer run."""

    lam: float = 0.0
    tau: float = 1e-10
    alpha0: Optional[float] = None  # None: p for fixed policy, 3 for adaptive
    alpha_policy: str = "fixed"
    max_iterations: Optional[int] = None  # None: 50 * p**3 safety bound
    initial_theta: Optional[ParamMatrix] = None
    penalize_diagonal: bool = False
    barrier_beta: float = 1e4

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"ridge weight must be >= 0, got {self.lam}")
        if self.tau <= 0:
            raise ValueError(f"stopping threshold must be > 0, got {self.tau}")
        if self.alpha_policy not in _ALPHA_POLICIES:
            raise ValueError(
                f"alpha_policy must be one of {_ALPHA_POLICIES}, got {self.alpha_policy!r}"
            )
        if self.alpha0 is not None and self.alpha0 < 3:
            raise ValueError(f"explicit alpha0 must be >= 3, got {self.alpha0}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")

    def penalty(self) -> PenaltyConfig:
        return PenaltyConfig(
            lam=self.lam,
            penalize_diagonal=self.penalize_diagonal,
            barrier_beta=self.barrier_beta,
        )


@dataclass(frozen=True)
class FitResult:
    """Estimate plus the convergence record of the run that produced it."""

    theta_hat: ParamMatrix
    iterations: int
    error_trace: tuple[float, ...]
    alpha_trace: tuple[float, ...]
    converged: bool


def default_initial_theta(families) -> ParamMatrix:
    """Constraint-feasible start: zeros, with -1 intercepts for exponential variates."""
    fams = tuple(families)
    p = len(fams)
    entries = np.zeros((p, p))
    for j, fam in enumerate(fams):
        if fam is VariateFamily.EXPONENTIAL:
            entries[j, j] = -1.0
    return ParamMatrix(entries, fams)


def block_newton_step(bd: BlockDerivatives) -> np.ndarray:
    """Newton step solving H_j d = -g_j on the free coordinates of block j.

    A zero gradient short-circuits to a zero step.  A failed or non-finite
    solve is retried once with -eps jitter on the diagonal,
    eps = 1e-8 * max(1, |trace(H_j)| / p).
    """
    p = bd.gradient.shape[0]
    delta = np.zeros(p)
    free = bd.free
    g = bd.gradient[free]
    if not g.size or not np.any(g):
        return delta
    h = bd.hessian[np.ix_(free, free)]
    step = _try_solve(h, -g)
    if step is None:
        eps = 1e-8 * max(1.0, abs(float(np.trace(bd.hessian))) / p)
        step = _try_solve(h - eps * np.eye(h.shape[0]), -g)
    if step is None:
        raise SingularBlockError(bd.j)
    delta[free] = step
    return delta


def _try_solve(h: np.ndarray, rhs: np.ndarray) -> Optional[np.ndarray]:
    try:
        step = np.linalg.solve(h, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(step)):
        return None
    return step


def aggregate_update(
    theta: ParamMatrix, deltas: list[np.ndarray], alpha: float
) -> ParamMatrix:
    """Sum the zero-padded block steps, scale by 1/alpha, add onto theta.

    The unique coordinate (j, j') receives (delta_j[j'] + delta_j'[j]) / alpha;
    the diagonal coordinate (j, j) receives delta_j[j] / alpha.  The result is
    exactly symmetric and preserves structural zeros.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    d = np.vstack(deltas)
    if d.shape != (theta.p, theta.p):
        raise ValueError(f"expected {theta.p} deltas of length {theta.p}")
    s = d + d.T
    np.fill_diagonal(s, np.diag(d))
    return theta.replace_entries(theta.entries + s / alpha)


def fit(data: MixedDataset, config: FitConfig, workers: int = 1) -> FitResult:
    """Run the block coordinate Newton-Raphson algorithm to convergence.

    workers > 1 evaluates the per-block Hessians on a thread pool; the result
    is bitwise identical to the single-worker run.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    p = data.p
    theta = config.initial_theta
    if theta is None:
        theta = default_initial_theta(data.families)
    if theta.families != data.families:
        raise ValueError("initial theta families do not match the dataset")
    pen = config.penalty()
    engine = _Engine(data, pen)
    tau = config.tau
    adaptive = config.alpha_policy == "adaptive-doubling"
    alpha = config.alpha0 if config.alpha0 is not None else (3.0 if adaptive else float(p))
    max_iter = config.max_iterations if config.max_iterations is not None else 50 * p**3

    state = _eval_state(engine, theta)
    error_trace: list[float] = []
    alpha_trace: list[float] = []
    converged = False
    err_prev = np.inf

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for k in range(max_iter):
            if pool is not None:
                hessians = list(
                    pool.map(lambda j: _block_hessian(engine, state, j), range(p))
                )
            else:
                hessians = [_block_hessian(engine, state, j) for j in range(p)]
            deltas = [
                block_newton_step(
                    BlockDerivatives(
                        j=j,
                        gradient=state.gradient_table[j],
                        hessian=hessians[j],
                        free=_free_row(engine, j),
                    )
                )
                for j in range(p)
            ]
            doublings = 0
            while True:
                candidate = aggregate_update(state.theta, deltas, alpha)
                cand_state = _eval_state(engine, candidate)
                err = cand_state.error_norm
                if not np.isfinite(err):
                    raise DivergenceError(
                        f"non-finite gradient norm at iteration {k} "
                        f"(max |entry| = {np.max(np.abs(candidate.entries))!r})"
                    )
                if (
                    adaptive
                    and err >= err_prev
                    and err > tau
                    and doublings < _MAX_DOUBLINGS_PER_ITERATION
                ):
                    alpha *= 2.0
                    doublings += 1
                    continue
                break
            state = cand_state
            error_trace.append(err)
            alpha_trace.append(alpha)
            if err <= tau:
                converged = True
                break
            err_prev = err
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    return FitResult(
        theta_hat=state.theta,
        iterations=len(error_trace),
        error_trace=tuple(error_trace),
        alpha_trace=tuple(alpha_trace),
        converged=converged,
    )
