"""Parameter matrix, mixed-type dataset, and the natural parameter map.

The model parameter is a symmetric p x p matrix.  Its diagonal entries act
as per-variate intercepts of the natural parameter and the off-diagonal
entries as pairwise interaction weights; a zero off-diagonal entry means
conditional independence of the pair.  Gaussian-Poisson and
Gaussian-exponential interactions are structural zeros: they are excluded
from the free-parameter set altogether rather than merely penalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .families import VariateFamily, value_domain_violations

_SYMMETRY_RTOL = 1e-12

_STRUCTURAL_PAIRS = {
    frozenset((VariateFamily.GAUSSIAN, VariateFamily.POISSON)),
    frozenset((VariateFamily.GAUSSIAN, VariateFamily.EXPONENTIAL)),
}


def structural_zero_mask(families: Sequence[VariateFamily]) -> np.ndarray:
    """Boolean p x p mask of entries pinned to zero by the family mix."""
    p = len(families)
    mask = np.zeros((p, p), dtype=bool)
    for j in range(p):
        for k in range(j + 1, p):
            if frozenset((families[j], families[k])) in _STRUCTURAL_PAIRS:
                mask[j, k] = mask[k, j] = True
    return mask


@dataclass(frozen=True)
class ParamMatrix:
    """Symmetric interaction/intercept matrix with per-variate families."""

    entries: np.ndarray
    families: tuple[VariateFamily, ...]

    def __post_init__(self):
        fams = tuple(self.families)
        object.__setattr__(self, "families", fams)
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError(f"parameter matrix must be square, got shape {a.shape}")
        p = a.shape[0]
        if len(fams) != p:
            raise DomainError(f"{len(fams)} families for a {p} x {p} matrix")
        if not np.all(np.isfinite(a)):
            raise DomainError("parameter matrix has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
        if np.max(np.abs(a - a.T), initial=0.0) > _SYMMETRY_RTOL * scale:
            raise DomainError("parameter matrix is not symmetric")
        # canonicalize to exact symmetry from the upper triangle
        a = np.triu(a) + np.triu(a, 1).T
        mask = structural_zero_mask(fams)
        if np.any(a[mask] != 0.0):
            j, k = np.argwhere(mask & (a != 0.0))[0]
            raise DomainError(
                f"structural zero violated at ({j}, {k}): "
                f"{fams[j].value}-{fams[k].value} interactions must be exactly 0"
            )
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def structural_zeros(self) -> np.ndarray:
        m = structural_zero_mask(self.families)
        m.setflags(write=False)
        return m

    @property
    def n_unique(self) -> int:
        """Count of unique coordinates j <= j', structural zeros included."""
        return self.p * (self.p + 1) // 2

    @property
    def n_free(self) -> int:
        """Count of unique coordinates that are free to vary."""
        return self.n_unique - int(np.count_nonzero(self.structural_zeros)) // 2

    def replace_entries(self, entries: np.ndarray) -> "ParamMatrix":
        return ParamMatrix(entries, self.families)

    def offdiag_unique_pairs(self) -> list[tuple[int, int]]:
        """All unordered off-diagonal index pairs (j < k)."""
        p = self.p
        return [(j, k) for j in range(p) for k in range(j + 1, p)]


def zero_theta(families: Sequence[VariateFamily]) -> ParamMatrix:
    """All-zero parameter matrix for the given family mix."""
    p = len(families)
    return ParamMatrix(np.zeros((p, p)), tuple(families))


@dataclass(frozen=True)
class MixedDataset:
    """n observations of p typed variates, validated column by column."""

    values: np.ndarray
    families: tuple[VariateFamily, ...]
    names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        fams = tuple(self.families)
        object.__setattr__(self, "families", fams)
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise DomainError(f"dataset values must be 2-D, got shape {v.shape}")
        n, p = v.shape
        if n < 1 or p < 1:
            raise DomainError(f"dataset must be non-empty, got shape {v.shape}")
        if len(fams) != p:
            raise DomainError(f"{len(fams)} families for {p} columns")
        if self.names is not None:
            names = tuple(self.names)
            if len(names) != p:
                raise DomainError(f"{len(names)} names for {p} columns")
            if len(set(names)) != p:
                raise DomainError("column names must be unique")
            object.__setattr__(self, "names", names)
        for j, fam in enumerate(fams):
            bad = value_domain_violations(fam, v[:, j])
            if bad.size:
                i = int(bad[0])
                label = self.names[j] if self.names else f"column {j}"
                raise DomainError(
                    f"{label} ({fam.value}): value {v[i, j]!r} at row {i} "
                    f"outside the {fam.value} domain"
                )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column_names(self) -> tuple[str, ...]:
        if self.names is not None:
            return self.names
        return tuple(f"x{j + 1}" for j in range(self.p))


def natural_parameter(theta: ParamMatrix, row, j: int) -> float:
    """eta_j = Theta_jj + sum_{k != j} Theta_jk * T_k(y_k) for one observation."""
    r = np.asarray(row, dtype=float)
    if r.shape != (theta.p,):
        raise DomainError(f"row of length {r.size} for p = {theta.p}")
    if not 0 <= j < theta.p:
        raise DomainError(f"variate index {j} out of range for p = {theta.p}")
    coeffs = theta.entries[j]
    return float(coeffs[j] + coeffs @ r - coeffs[j] * r[j])


def natural_parameter_matrix(theta: ParamMatrix, values: np.ndarray) -> np.ndarray:
    """eta for every (observation, variate) cell at once."""
    diag = np.diag(theta.entries)
    return diag[None, :] + values @ theta.entries - values * diag[None, :]
