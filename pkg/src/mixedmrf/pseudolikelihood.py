"""Penalized pseudo-log-likelihood, per-block derivatives, and the error norm.

The sample pseudo-log-likelihood averages every variate-wise conditional
log-likelihood over the observations.  The penalized variant subtracts the
ridge term 0.5 * lambda * ||Theta||_F^2 (diagonal optionally excluded; each
symmetric off-diagonal pair counts twice in the Frobenius norm) and the
smooth constraint barrier.

Derivatives are taken with respect to the unique coordinates (j <= j').  The
coordinate (j, j') receives contributions from both the node-j and the node-j'
conditionals; each block's gradient/Hessian is the restriction of the full
objective's derivatives to that block's row, holding everything else fixed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constraints import (
    ConstraintSet,
    barrier_block_hessian,
    barrier_value_and_gradient,
)
from .errors import EvaluationError
from .families import VariateFamily, log_base_measure
from .model import MixedDataset, ParamMatrix, structural_zero_mask


@dataclass(frozen=True)
class PenaltyConfig:
    """Ridge weight, diagonal treatment, and barrier strength."""

    lam: float = 0.0
    penalize_diagonal: bool = False
    barrier_beta: float = 1e4

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"ridge weight must be >= 0, got {self.lam}")
        if self.barrier_beta <= 0:
            raise ValueError(f"barrier weight must be > 0, got {self.barrier_beta}")


@dataclass(frozen=True)
class BlockDerivatives:
    """Gradient and Hessian of the penalized objective for one block."""

    j: int
    gradient: np.ndarray
    hessian: np.ndarray
    free: np.ndarray  # False at structural-zero coordinates of this row


class _Engine:
    """Caches per-(dataset, penalty) quantities reused across evaluations."""

    def __init__(self, data: MixedDataset, pen: PenaltyConfig):
        self.data = data
        self.pen = pen
        self.T = data.values  # sufficient statistics: identity on the values
        self.TT = self.T * self.T
        self.n, self.p = data.values.shape
        self.families = data.families
        self.groups = {}
        for fam in VariateFamily:
            cols = [j for j, f in enumerate(self.families) if f is fam]
            if cols:
                self.groups[fam] = np.asarray(cols, dtype=int)
        self.constraints = ConstraintSet(self.families)
        self.struct = structural_zero_mask(self.families)
        iu, ju = np.triu_indices(self.p, k=1)
        keep = ~self.struct[iu, ju]
        self._offdiag_rows = iu[keep]
        self._offdiag_cols = ju[keep]

    # -- family-wise conditional moments -------------------------------------

    def parts(self, entries: np.ndarray):
        """(eta, mean, variance) arrays for every cell, domain-checked."""
        diag = np.diag(entries)
        eta = diag[None, :] + self.T @ entries - self.T * diag[None, :]
        mu = np.empty_like(eta)
        w = np.empty_like(eta)
        for fam, cols in self.groups.items():
            sub = eta[:, cols]
            if fam is VariateFamily.BERNOULLI:
                m = _sigmoid(sub)
                s = np.exp(-np.abs(sub))
                v = s / (1.0 + s) ** 2
            elif fam is VariateFamily.GAUSSIAN:
                m = sub
                v = np.ones_like(sub)
            elif fam is VariateFamily.POISSON:
                m = np.exp(sub)
                v = m
            else:
                if np.any(sub >= 0.0):
                    i, c = np.argwhere(sub >= 0.0)[0]
                    j = int(cols[c])
                    raise EvaluationError(
                        f"natural parameter {sub[i, c]!r} >= 0 for exponential "
                        f"variate {j} at observation {int(i)}"
                    )
                m = -1.0 / sub
                v = 1.0 / (sub * sub)
            mu[:, cols] = m
            w[:, cols] = v
        return eta, mu, w


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True)
class _EvalState:
    """Everything shared across the p blocks at a fixed parameter value."""

    theta: ParamMatrix
    eta: np.ndarray
    mu: np.ndarray
    w: np.ndarray
    barrier_terms: tuple
    gradient_table: np.ndarray  # unique-coordinate derivative, mirrored
    error_norm: float
    col_wsum: np.ndarray  # sum_i w_ij
    tw: np.ndarray  # T' w   (p x p)
    ttw: np.ndarray  # (T^2)' w


def _eval_state(engine: _Engine, theta: ParamMatrix) -> _EvalState:
    entries = theta.entries
    eta, mu, w = engine.parts(entries)
    n = engine.n
    r = engine.T - mu
    m = (r.T @ engine.T) / n
    grad = m + m.T
    np.fill_diagonal(grad, r.mean(axis=0))
    lam = engine.pen.lam
    if lam > 0.0:
        ridge = 2.0 * lam * entries
        diag_w = lam if engine.pen.penalize_diagonal else 0.0
        np.fill_diagonal(ridge, diag_w * np.diag(entries))
        grad -= ridge
    terms = tuple(engine.constraints.barrier_terms(entries))
    if terms:
        _, bgrad = barrier_value_and_gradient(terms, engine.pen.barrier_beta, engine.p)
        grad -= bgrad
    grad[engine.struct] = 0.0
    off = grad[engine._offdiag_rows, engine._offdiag_cols]
    err = float(np.sqrt(np.sum(off * off) + np.sum(np.diag(grad) ** 2)))
    return _EvalState(
        theta=theta,
        eta=eta,
        mu=mu,
        w=w,
        barrier_terms=terms,
        gradient_table=grad,
        error_norm=err,
        col_wsum=w.sum(axis=0),
        tw=engine.T.T @ w,
        ttw=engine.TT.T @ w,
    )


def _block_hessian(engine: _Engine, state: _EvalState, j: int) -> np.ndarray:
    """Hessian of the penalized objective restricted to block j."""
    n = engine.n
    t = engine.T
    wj = state.w[:, j]
    b = t.T @ (t * wj[:, None])
    u = state.tw[:, j]
    b[j, :] = u
    b[:, j] = u
    b[j, j] = state.col_wsum[j]
    # other-conditional curvature lands on the diagonal coordinates k != j
    extra = state.ttw[j, :].copy()
    extra[j] = 0.0
    hess = -(b + np.diag(extra)) / n
    lam = engine.pen.lam
    if lam > 0.0:
        ridge_diag = np.full(engine.p, 2.0 * lam)
        ridge_diag[j] = lam if engine.pen.penalize_diagonal else 0.0
        hess -= np.diag(ridge_diag)
    if state.barrier_terms:
        hess -= barrier_block_hessian(
            state.barrier_terms, engine.pen.barrier_beta, j, engine.p
        )
    dead = engine.struct[j]
    if dead.any():
        hess[dead, :] = 0.0
        hess[:, dead] = 0.0
    return hess


def _free_row(engine: _Engine, j: int) -> np.ndarray:
    return ~engine.struct[j]


# -- public operations ---------------------------------------------------------


def pseudo_loglik(theta: ParamMatrix, data: MixedDataset) -> float:
    """Average over observations of the summed conditional log-likelihoods."""
    _check_dims(theta, data)
    engine = _Engine(data, PenaltyConfig())
    eta, mu, _ = engine.parts(theta.entries)
    total = np.sum(data.values * eta)
    for fam, cols in engine.groups.items():
        sub = eta[:, cols]
        if fam is VariateFamily.BERNOULLI:
            total -= np.sum(np.logaddexp(0.0, sub))
        elif fam is VariateFamily.GAUSSIAN:
            total -= 0.5 * np.sum(sub * sub)
        elif fam is VariateFamily.POISSON:
            total -= np.sum(np.exp(sub))
        else:
            total -= np.sum(-np.log(-sub))
        total += np.sum(log_base_measure(fam, data.values[:, cols]))
    return float(total) / data.n


def penalized_pseudo_loglik(
    theta: ParamMatrix, data: MixedDataset, pen: PenaltyConfig
) -> float:
    """pseudo_loglik minus the ridge term and the constraint barrier."""
    _check_dims(theta, data)
    value = pseudo_loglik(theta, data)
    value -= _ridge_value(theta, pen)
    cs = ConstraintSet(theta.families)
    terms = cs.barrier_terms(theta.entries)
    if terms:
        bval, _ = barrier_value_and_gradient(terms, pen.barrier_beta, theta.p)
        value -= bval
    return value


def _ridge_value(theta: ParamMatrix, pen: PenaltyConfig) -> float:
    if pen.lam == 0.0:
        return 0.0
    e = theta.entries
    off = np.sum(np.triu(e, 1) ** 2)
    value = pen.lam * off  # each symmetric pair appears twice in ||.||_F^2
    if pen.penalize_diagonal:
        value += 0.5 * pen.lam * np.sum(np.diag(e) ** 2)
    return float(value)


def block_derivatives(
    theta: ParamMatrix, data: MixedDataset, pen: PenaltyConfig, j: int
) -> BlockDerivatives:
    """Exact derivatives of the penalized objective restricted to block j."""
    _check_dims(theta, data)
    if not 0 <= j < theta.p:
        raise ValueError(f"block index {j} out of range for p = {theta.p}")
    engine = _Engine(data, pen)
    state = _eval_state(engine, theta)
    grad = state.gradient_table[j].copy()
    hess = _block_hessian(engine, state, j)
    return BlockDerivatives(j=j, gradient=grad, hessian=hess, free=_free_row(engine, j))


def full_gradient_norm(
    theta: ParamMatrix, data: MixedDataset, pen: PenaltyConfig
) -> float:
    """Euclidean norm of the objective gradient over the unique free coordinates."""
    _check_dims(theta, data)
    engine = _Engine(data, pen)
    return _eval_state(engine, theta).error_norm


def _check_dims(theta: ParamMatrix, data: MixedDataset) -> None:
    if theta.p != data.p:
        raise ValueError(f"parameter matrix is {theta.p}-variate, data has p = {data.p}")
    if theta.families != data.families:
        raise ValueError("parameter matrix and dataset disagree on variate families")
