"""Gibbs sampler for the pairwise joint MRF distribution.

A single chain sweeps the variates in ascending order, redrawing each from its
node-conditional given the current values of all others.  After ``burn_in``
full sweeps, one state is recorded every ``thinning`` sweeps until
``n_samples`` rows are collected, for a total of
``burn_in + thinning * n_samples`` sweeps.

Randomness comes from numpy's counter-based Philox bit generator seeded with
``ChainConfig.seed``, so identical configurations reproduce the dataset
bitwise across runs and platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constraints import check_constraints
from .errors import ConstraintViolationError, SamplingError
from .families import VariateFamily, value_domain_violations
from .model import MixedDataset, ParamMatrix

_POISSON_RATE_LIMIT = 1e15

_BERNOULLI, _GAUSSIAN, _POISSON, _EXPONENTIAL = range(4)
_CODE = {
    VariateFamily.BERNOULLI: _BERNOULLI,
    VariateFamily.GAUSSIAN: _GAUSSIAN,
    VariateFamily.POISSON: _POISSON,
    VariateFamily.EXPONENTIAL: _EXPONENTIAL,
}


@dataclass(frozen=True)
class ChainConfig:
    """Length, burn-in, thinning, seed and optional start of one chain."""

    n_samples: int
    burn_in: int = 5000
    thinning: int = 500
    seed: int = 0
    initial_state: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.thinning < 1:
            raise ValueError(f"thinning must be >= 1, got {self.thinning}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit an unsigned 64-bit integer")


def _draw(code: int, eta: float, rng: np.random.Generator) -> float:
    if code == _BERNOULLI:
        if eta >= 0:
            prob = 1.0 / (1.0 + math.exp(-eta))
        else:
            e = math.exp(eta)
            prob = e / (1.0 + e)
        return 1.0 if rng.random() < prob else 0.0
    if code == _GAUSSIAN:
        return eta + rng.standard_normal()
    if code == _POISSON:
        lam = math.exp(eta) if eta < 700.0 else math.inf
        if not lam < _POISSON_RATE_LIMIT:
            raise SamplingError(f"poisson rate exp({eta!r}) too large to sample")
        return float(rng.poisson(lam))
    if eta >= 0:
        raise SamplingError(
            f"exponential conditional requires eta < 0, got eta = {eta!r}"
        )
    return rng.exponential(-1.0 / eta)


def conditional_draw(
    family: VariateFamily, eta: float, rng: np.random.Generator
) -> float:
    """One draw from the node-conditional distribution at natural parameter eta."""
    return _draw(_CODE[family], float(eta), rng)


def _gibbs_sweep(y, rows_zero_diag, diag, codes, rng, sweep_index):
    """One full systematic scan, updating y in place."""
    for j in range(len(y)):
        eta = diag[j] + float(rows_zero_diag[j] @ y)
        try:
            y[j] = _draw(codes[j], eta, rng)
        except SamplingError as exc:
            raise SamplingError(
                f"sweep {sweep_index}, variate {j}: {exc}"
            ) from None


def gibbs_chain(theta: ParamMatrix, config: ChainConfig) -> MixedDataset:
    """Draw a dataset from the pairwise joint MRF distribution of theta."""
    report = check_constraints(theta)
    if not report.satisfied:
        raise ConstraintViolationError(report)
    p = theta.p
    codes = [_CODE[f] for f in theta.families]
    diag = np.diag(theta.entries).copy()
    rows_zero_diag = []
    for j in range(p):
        row = theta.entries[j].copy()
        row[j] = 0.0
        rows_zero_diag.append(row)
    rng = np.random.Generator(np.random.Philox(int(config.seed)))

    if config.initial_state is not None:
        y = np.array(config.initial_state, dtype=float)
        if y.shape != (p,):
            raise ValueError(f"initial state must have length {p}")
        for j, fam in enumerate(theta.families):
            if value_domain_violations(fam, y[j : j + 1]).size:
                raise ValueError(
                    f"initial state entry {y[j]!r} outside the {fam.value} domain "
                    f"of variate {j}"
                )
    else:
        # each variate from its conditional with all others at zero
        y = np.zeros(p)
        for j in range(p):
            y[j] = _draw(codes[j], float(diag[j]), rng)

    out = np.empty((config.n_samples, p))
    sweep = 0
    for _ in range(config.burn_in):
        _gibbs_sweep(y, rows_zero_diag, diag, codes, rng, sweep)
        sweep += 1
    for i in range(config.n_samples):
        for _ in range(config.thinning):
            _gibbs_sweep(y, rows_zero_diag, diag, codes, rng, sweep)
            sweep += 1
        out[i] = y
    return MixedDataset(out, theta.families)
