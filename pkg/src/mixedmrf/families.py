"""The four node-conditional exponential-family members.

Each variate of the pairwise MRF is, conditionally on the others, one of
Bernoulli, Gaussian (unit variance), Poisson or exponential.  All four have
identity sufficient statistic T(y) = y; they differ in base measure h,
log-partition function D and the domain of the natural parameter eta.

The Gaussian conditional variance is fixed at 1 and the 1/sqrt(2*pi)
normalisation is folded into the base measure, so that D(eta) = eta^2/2
and the conditional mean map is the identity.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

_LOG_2PI = math.log(2.0 * math.pi)


class VariateFamily(Enum):
    """Conditional distribution family of a single variate."""

    BERNOULLI = "bernoulli"
    GAUSSIAN = "gaussian"
    POISSON = "poisson"
    EXPONENTIAL = "exponential"

    @classmethod
    def from_tag(cls, tag: str) -> "VariateFamily":
        try:
            return cls(tag.strip().lower())
        except ValueError:
            valid = ", ".join(f.value for f in cls)
            raise DomainError(f"unknown family tag {tag!r}; expected one of: {valid}") from None

    def __repr__(self) -> str:  # keeps error messages short
        return self.value


def _stable_sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _bernoulli_variance(eta: np.ndarray) -> np.ndarray:
    # exp(-|eta|)/(1+exp(-|eta|))^2 stays positive where sigma*(1-sigma) rounds to 0
    s = np.exp(-np.abs(eta))
    return s / (1.0 + s) ** 2


def require_natural_domain(family: VariateFamily, eta: np.ndarray) -> None:
    """Raise unless every eta lies in the family's natural-parameter domain."""
    if family is VariateFamily.EXPONENTIAL and not np.all(np.asarray(eta) < 0):
        bad = float(np.max(eta))
        raise DomainError(
            f"exponential family requires natural parameter eta < 0, got eta = {bad!r}"
        )


def family_functions(family: VariateFamily, eta):
    """Log-partition D(eta) with its first two derivatives.

    Returns the triple (D(eta), D'(eta), D''(eta)); D' is the conditional
    mean of the sufficient statistic and D'' its conditional variance.
    Accepts scalars or arrays.
    """
    eta_arr = np.asarray(eta, dtype=float)
    require_natural_domain(family, eta_arr)
    if family is VariateFamily.BERNOULLI:
        logpart = np.logaddexp(0.0, eta_arr)
        mean = _stable_sigmoid(eta_arr)
        var = _bernoulli_variance(eta_arr)
    elif family is VariateFamily.GAUSSIAN:
        logpart = 0.5 * eta_arr**2
        mean = eta_arr.copy()
        var = np.ones_like(eta_arr)
    elif family is VariateFamily.POISSON:
        logpart = np.exp(eta_arr)
        mean = logpart.copy()
        var = logpart.copy()
    else:  # exponential, eta < 0
        logpart = -np.log(-eta_arr)
        mean = -1.0 / eta_arr
        var = 1.0 / eta_arr**2
    if np.isscalar(eta) or np.ndim(eta) == 0:
        return float(logpart), float(mean), float(var)
    return logpart, mean, var


def value_domain_violations(family: VariateFamily, values) -> np.ndarray:
    """Indices (flat) of entries outside the family's value domain."""
    v = np.asarray(values, dtype=float).ravel()
    if family is VariateFamily.BERNOULLI:
        bad = ~((v == 0.0) | (v == 1.0))
    elif family is VariateFamily.GAUSSIAN:
        bad = ~np.isfinite(v)
    elif family is VariateFamily.POISSON:
        bad = ~(np.isfinite(v) & (v >= 0.0) & (v == np.floor(v)))
    else:
        bad = ~(np.isfinite(v) & (v >= 0.0))
    return np.flatnonzero(bad)


def require_value_domain(family: VariateFamily, values, context: str = "") -> None:
    bad = value_domain_violations(family, values)
    if bad.size:
        v = np.asarray(values, dtype=float).ravel()
        where = f" ({context})" if context else ""
        raise DomainError(
            f"value {v[bad[0]]!r} outside the {family.value} domain{where}"
        )


def log_base_measure(family: VariateFamily, y):
    """log h(y) for a value (or array of values) in the family's domain."""
    require_value_domain(family, y)
    y_arr = np.asarray(y, dtype=float)
    if family is VariateFamily.BERNOULLI or family is VariateFamily.EXPONENTIAL:
        out = np.zeros_like(y_arr)
    elif family is VariateFamily.GAUSSIAN:
        out = -0.5 * y_arr**2 - 0.5 * _LOG_2PI
    else:  # poisson: -log(y!)
        out = -gammaln(y_arr + 1.0)
    if np.isscalar(y) or np.ndim(y) == 0:
        return float(out)
    return out
