"""Well-definedness constraints on the parameter matrix and their smooth barrier.

Pairwise interactions among Poisson/exponential variates must be non-positive,
exponential variates need a strictly negative rate intercept, Bernoulli
interactions pointing at an exponential variate must not be able to push its
rate non-negative, and the Gaussian block must imply a positive-definite joint
precision (lambda_max of the Gaussian off-diagonal block below 1, the diagonal
acting as intercepts).

``check_constraints`` reports exact violations; ``constraint_penalty`` is the
convex, twice-differentiable cubic-hinge barrier used inside the optimizer.
Strict inequalities carry a small margin so that boundary violations have a
strictly positive magnitude and barrier-feasible points keep the rate strictly
negative.  The Bernoulli-exponential max() aggregate is replaced by a softplus
upper bound inside the barrier to keep it differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .families import VariateFamily
from .model import ParamMatrix

RATE_MARGIN = 1e-6
SOFTPLUS_SHARPNESS = 50.0
DEFAULT_BARRIER_WEIGHT = 1e4

_SIGN_CONSTRAINED = {
    frozenset((VariateFamily.POISSON, VariateFamily.POISSON)),
    frozenset((VariateFamily.POISSON, VariateFamily.EXPONENTIAL)),
    frozenset((VariateFamily.EXPONENTIAL, VariateFamily.EXPONENTIAL)),
}


@dataclass(frozen=True)
class ConstraintViolation:
    constraint_id: str
    indices: tuple[int, ...]
    magnitude: float


@dataclass(frozen=True)
class ConstraintReport:
    violations: tuple[ConstraintViolation, ...]

    @property
    def satisfied(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class _BarrierTerm:
    """One active (g > 0) constraint with hinge slack g and derivatives of g.

    grads maps each involved unique coordinate (a, b), a <= b, to dg/dTheta_ab;
    curvs maps coordinate pairs to the non-zero second derivatives of g.  For
    the Gaussian-block eigenvalue term the curvature of g itself is omitted
    (first-order eigenvalue sensitivity only); the hinge's own outer-product
    curvature is always carried by the caller.
    """

    constraint_id: str
    g: float
    grads: tuple[tuple[tuple[int, int], float], ...]
    curvs: tuple[tuple[tuple[int, int], tuple[int, int], float], ...] = ()


def _softplus(x: float, kappa: float = SOFTPLUS_SHARPNESS) -> float:
    z = kappa * x
    if z > 30.0:
        return x + np.log1p(np.exp(-z)) / kappa
    return np.log1p(np.exp(z)) / kappa


def _softplus_grad(x: float, kappa: float = SOFTPLUS_SHARPNESS) -> float:
    z = kappa * x
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


class ConstraintSet:
    """Constraint structure derived from the family mix (independent of values)."""

    def __init__(self, families: Sequence[VariateFamily]):
        self.families = tuple(families)
        p = len(self.families)
        pairs = []
        for j in range(p):
            for k in range(j + 1, p):
                key = frozenset((self.families[j], self.families[k]))
                if key in _SIGN_CONSTRAINED:
                    pairs.append((j, k))
        self.sign_pairs = pairs
        self.exponential_idx = [
            j for j, f in enumerate(self.families) if f is VariateFamily.EXPONENTIAL
        ]
        self.bernoulli_idx = [
            j for j, f in enumerate(self.families) if f is VariateFamily.BERNOULLI
        ]
        self.gaussian_idx = [
            j for j, f in enumerate(self.families) if f is VariateFamily.GAUSSIAN
        ]

    def _sign_id(self, j: int, k: int) -> str:
        a, b = sorted((self.families[j].value, self.families[k].value))
        return f"{a}-{b}"

    def _gaussian_block_top(self, entries: np.ndarray):
        """(lambda_max, leading eigenvector) of the Gaussian off-diagonal block."""
        g = self.gaussian_idx
        sub = entries[np.ix_(g, g)].copy()
        np.fill_diagonal(sub, 0.0)
        vals, vecs = np.linalg.eigh(sub)
        return float(vals[-1]), vecs[:, -1]

    def violations(self, entries: np.ndarray) -> list[ConstraintViolation]:
        out = []
        for j, k in self.sign_pairs:
            v = float(entries[j, k])
            if v > 0.0:
                out.append(ConstraintViolation(self._sign_id(j, k), (j, k), v))
        for j in self.exponential_idx:
            g = float(entries[j, j]) + RATE_MARGIN
            if g > 0.0:
                out.append(ConstraintViolation("exponential-rate", (j,), g))
        if len(self.gaussian_idx) >= 2:
            lam, _ = self._gaussian_block_top(entries)
            g = lam - 1.0 + RATE_MARGIN
            if g > 0.0:
                out.append(
                    ConstraintViolation("gaussian-block", tuple(self.gaussian_idx), g)
                )
        if self.bernoulli_idx:
            for j in self.exponential_idx:
                g = float(entries[j, j]) + RATE_MARGIN
                g += sum(max(0.0, float(entries[b, j])) for b in self.bernoulli_idx)
                if g > 0.0:
                    out.append(
                        ConstraintViolation(
                            "bernoulli-exponential",
                            (j, *self.bernoulli_idx),
                            g,
                        )
                    )
        return out

    def barrier_terms(self, entries: np.ndarray) -> list[_BarrierTerm]:
        """Active smooth-barrier terms (g > 0) at the given parameter values."""
        terms = []
        for j, k in self.sign_pairs:
            g = float(entries[j, k])
            if g > 0.0:
                terms.append(_BarrierTerm(self._sign_id(j, k), g, (((j, k), 1.0),)))
        for j in self.exponential_idx:
            g = float(entries[j, j]) + RATE_MARGIN
            if g > 0.0:
                terms.append(_BarrierTerm("exponential-rate", g, (((j, j), 1.0),)))
        if len(self.gaussian_idx) >= 2:
            lam, vec = self._gaussian_block_top(entries)
            g = lam - 1.0 + RATE_MARGIN
            if g > 0.0:
                grads = []
                gi = self.gaussian_idx
                for a in range(len(gi)):
                    for b in range(a + 1, len(gi)):
                        grads.append(((gi[a], gi[b]), 2.0 * float(vec[a] * vec[b])))
                terms.append(_BarrierTerm("gaussian-block", g, tuple(grads)))
        if self.bernoulli_idx:
            kappa = SOFTPLUS_SHARPNESS
            for j in self.exponential_idx:
                g = float(entries[j, j])
                grads = [((j, j), 1.0)]
                curvs = []
                for b in self.bernoulli_idx:
                    x = float(entries[min(b, j), max(b, j)])
                    g += _softplus(x)
                    s = _softplus_grad(x)
                    coord = (min(b, j), max(b, j))
                    grads.append((coord, s))
                    curvs.append((coord, coord, kappa * s * (1.0 - s)))
                if g > 0.0:
                    terms.append(
                        _BarrierTerm(
                            "bernoulli-exponential", g, tuple(grads), tuple(curvs)
                        )
                    )
        return terms


def check_constraints(theta: ParamMatrix) -> ConstraintReport:
    """Exact Table-style well-definedness check; violations are data, not errors."""
    cs = ConstraintSet(theta.families)
    return ConstraintReport(tuple(cs.violations(theta.entries)))


def barrier_value_and_gradient(
    terms: Sequence[_BarrierTerm], beta: float, p: int
) -> tuple[float, np.ndarray]:
    """beta * sum hinge(g)^3 and its gradient w.r.t. each unique coordinate.

    The gradient table stores the derivative for coordinate (a, b) at both
    (a, b) and (b, a).
    """
    value = 0.0
    grad = np.zeros((p, p))
    for t in terms:
        value += beta * t.g**3
        coef = 3.0 * beta * t.g**2
        for (a, b), w in t.grads:
            grad[a, b] += coef * w
            if a != b:
                grad[b, a] += coef * w
    return value, grad


def barrier_block_hessian(
    terms: Sequence[_BarrierTerm], beta: float, j: int, p: int
) -> np.ndarray:
    """Second derivatives of the barrier w.r.t. the coordinates of block j."""
    hess = np.zeros((p, p))

    def _local(coord):
        a, b = coord
        if a == j:
            return b
        if b == j:
            return a
        return None

    for t in terms:
        locs = [(_local(c), w) for c, w in t.grads]
        locs = [(i, w) for i, w in locs if i is not None]
        c1 = 6.0 * beta * t.g
        for i1, w1 in locs:
            for i2, w2 in locs:
                hess[i1, i2] += c1 * w1 * w2
        c2 = 3.0 * beta * t.g**2
        for ca, cb, w in t.curvs:
            ia, ib = _local(ca), _local(cb)
            if ia is not None and ib is not None:
                hess[ia, ib] += c2 * w
                if ia != ib:
                    hess[ib, ia] += c2 * w
    return hess


def constraint_penalty(theta: ParamMatrix, beta: float = DEFAULT_BARRIER_WEIGHT):
    """Smooth barrier value and its gradient table at the given parameters.

    Zero (with a zero gradient) exactly when no inequality constraint is
    active; C^2 across each constraint boundary by the cubic hinge.
    """
    if beta <= 0:
        raise ValueError(f"barrier weight must be positive, got {beta}")
    cs = ConstraintSet(theta.families)
    terms = cs.barrier_terms(theta.entries)
    return barrier_value_and_gradient(terms, beta, theta.p)
