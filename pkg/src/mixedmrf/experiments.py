"""Synthetic-data experiments: lattice recovery, Gaussian comparison, baselines.

The reference graph is a 4 x 4 lattice of 16 nodes with one family per
column -- Gaussian, Bernoulli, Poisson, exponential from left to right --
wired with all horizontal and vertical grid edges plus the diagonals of the
unit squares not touching the Gaussian column (so Gaussian nodes never meet
Poisson or exponential nodes).  That yields 36 edges of common weight -0.2,
intercepts -0.2 for Bernoulli/exponential nodes and 2 for Gaussian/Poisson
nodes, and a parameter matrix that satisfies every well-definedness
constraint.

The Gaussian comparison uses a three-banded precision matrix with unit
diagonal; with unit conditional variances the matching MRF parameter has
off-diagonal -Omega and a zero diagonal.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .constraints import (
    RATE_MARGIN,
    SOFTPLUS_SHARPNESS,
    _softplus,
    _softplus_grad,
)
from .errors import ParameterError
from .families import VariateFamily
from .model import MixedDataset, ParamMatrix
from .optimizer import FitConfig, fit
from .pseudolikelihood import PenaltyConfig, _Engine
from .sampler import ChainConfig, gibbs_chain
from .selection import cross_validate, default_lambda_grid

LATTICE_EDGE_WEIGHT = -0.2
LATTICE_SIDE = 4
_COLUMN_FAMILIES = (
    VariateFamily.GAUSSIAN,
    VariateFamily.BERNOULLI,
    VariateFamily.POISSON,
    VariateFamily.EXPONENTIAL,
)


@dataclass(frozen=True)
class EdgeSet:
    """Unordered weighted index pairs without self-loops or duplicates."""

    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        canon = []
        seen = set()
        for j, k, w in self.edges:
            if j == k:
                raise ParameterError(f"self-loop on node {j}")
            a, b = (j, k) if j < k else (k, j)
            if (a, b) in seen:
                raise ParameterError(f"duplicate edge ({a}, {b})")
            seen.add((a, b))
            canon.append((a, b, float(w)))
        object.__setattr__(self, "edges", tuple(canon))

    def pairs(self) -> set[tuple[int, int]]:
        return {(j, k) for j, k, _ in self.edges}

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class CellResult:
    """One (estimator, sample size, replicate) cell of an experiment."""

    estimator: str
    n: int
    replicate: int
    frobenius_error: float
    edges_recovered: Optional[int]
    lambda_used: Optional[float]
    max_fit_iterations: Optional[int]
    all_converged: Optional[bool]
    failure: Optional[str] = None


@dataclass(frozen=True)
class ExperimentReport:
    """All cells of a recovery experiment plus its settings."""

    experiment: str
    sample_sizes: tuple[int, ...]
    replicates: tuple[int, ...]
    estimators: tuple[str, ...]
    seed: int
    true_edge_count: int
    cells: tuple[CellResult, ...]

    def errors(self, estimator: str, n: int) -> list[float]:
        return [
            c.frobenius_error
            for c in self.cells
            if c.estimator == estimator and c.n == n and c.failure is None
        ]

    def recoveries(self, estimator: str, n: int) -> list[int]:
        return [
            c.edges_recovered
            for c in self.cells
            if c.estimator == estimator
            and c.n == n
            and c.failure is None
            and c.edges_recovered is not None
        ]


def lattice_theta() -> tuple[ParamMatrix, EdgeSet]:
    """The 16-node mixed-family lattice parameter matrix and its edge set."""
    side = LATTICE_SIDE
    p = side * side
    families = tuple(_COLUMN_FAMILIES[c] for _ in range(side) for c in range(side))

    def node(r: int, c: int) -> int:
        return side * r + c

    pairs: list[tuple[int, int]] = []
    for r in range(side):
        for c in range(side - 1):
            pairs.append((node(r, c), node(r, c + 1)))
    for r in range(side - 1):
        for c in range(side):
            pairs.append((node(r, c), node(r + 1, c)))
    # diagonals only between the discrete-type columns (1-2 and 2-3)
    for r in range(side - 1):
        for c in (1, 2):
            pairs.append((node(r, c), node(r + 1, c + 1)))
            pairs.append((node(r + 1, c), node(r, c + 1)))

    entries = np.zeros((p, p))
    for j, k in pairs:
        entries[j, k] = entries[k, j] = LATTICE_EDGE_WEIGHT
    for j, fam in enumerate(families):
        if fam in (VariateFamily.BERNOULLI, VariateFamily.EXPONENTIAL):
            entries[j, j] = -0.2
        else:
            entries[j, j] = 2.0
    theta = ParamMatrix(entries, families)
    edges = EdgeSet(tuple((j, k, LATTICE_EDGE_WEIGHT) for j, k in pairs))
    return theta, edges


def banded_precision(p: int) -> np.ndarray:
    """Three-banded precision matrix: unit diagonal, bands 0.5 / 0.2 / 0.1."""
    if p < 4:
        raise ParameterError(f"banded precision needs p >= 4, got {p}")
    omega = np.eye(p)
    for offset, value in ((1, 0.5), (2, 0.2), (3, 0.1)):
        for j in range(p - offset):
            omega[j, j + offset] = omega[j + offset, j] = value
    return omega


def gaussian_theta_from_precision(omega: np.ndarray) -> ParamMatrix:
    """MRF parameter whose all-Gaussian joint is N(0, omega^{-1}) at unit diag."""
    omega = np.asarray(omega, dtype=float)
    p = omega.shape[0]
    entries = -omega.copy()
    np.fill_diagonal(entries, 0.0)
    return ParamMatrix(entries, tuple([VariateFamily.GAUSSIAN] * p))


def top_k_edges(theta: ParamMatrix, k: int) -> EdgeSet:
    """The k off-diagonal unique coordinates of largest absolute value.

    Ties break lexicographically on (j, j').
    """
    pairs = theta.offdiag_unique_pairs()
    if k < 0 or k > len(pairs):
        raise ParameterError(
            f"k must lie in [0, {len(pairs)}] for p = {theta.p}, got {k}"
        )
    ranked = sorted(
        pairs, key=lambda jk: (-abs(float(theta.entries[jk[0], jk[1]])), jk[0], jk[1])
    )
    chosen = ranked[:k]
    return EdgeSet(
        tuple((j, kk, float(theta.entries[j, kk])) for j, kk in chosen)
    )


def nodewise_baseline(
    data: MixedDataset, lam: float, tol: float = 1e-10, max_iter: int = 200
) -> ParamMatrix:
    """Averaged node-wise ridge regressions, one per conditional likelihood.

    Each node's conditional log-likelihood is maximized over its own row only
    (other nodes' parameters absent), with ridge weight lam on the
    off-diagonal coefficients, by a damped Newton method.  Off-diagonal
    coordinates get the mean of their two per-node estimates; diagonals come
    from each node's own fit.
    """
    if lam < 0:
        raise ParameterError(f"ridge weight must be >= 0, got {lam}")
    engine = _Engine(data, PenaltyConfig())
    p = data.p
    coef = np.zeros((p, p))  # row j: node-j regression coefficients

    for j in range(p):
        free = ~engine.struct[j]
        c = np.zeros(p)
        if data.families[j] is VariateFamily.EXPONENTIAL:
            c[j] = -1.0
        value = _node_objective(engine, j, c, lam)
        grad_norm = np.inf
        for _ in range(max_iter):
            g, h = _node_derivatives(engine, j, c, lam)
            grad_norm = float(np.linalg.norm(g[free]))
            if grad_norm <= tol:
                break
            try:
                step_f = np.linalg.solve(h[np.ix_(free, free)], -g[free])
            except np.linalg.LinAlgError:
                eps = 1e-8 * max(1.0, abs(float(np.trace(h))) / p)
                step_f = np.linalg.solve(
                    h[np.ix_(free, free)] - eps * np.eye(int(free.sum())), -g[free]
                )
            step = np.zeros(p)
            step[free] = step_f
            size = 1.0
            for _ in range(60):
                cand_value = _node_objective(engine, j, c + size * step, lam)
                if np.isfinite(cand_value) and cand_value >= value - 1e-15:
                    break
                size *= 0.5
            else:
                raise ParameterError(f"node {j}: damped Newton failed to progress")
            c = c + size * step
            value = _node_objective(engine, j, c, lam)
            if np.max(np.abs(c)) > 1e6:
                raise ParameterError(f"node {j}: regression diverged")
        if grad_norm > max(tol, 1e-6):
            raise ParameterError(
                f"node {j}: no convergence within {max_iter} Newton iterations"
            )
        coef[j] = c

    entries = 0.5 * (coef + coef.T)
    np.fill_diagonal(entries, np.diag(coef))
    entries[engine.struct] = 0.0
    return ParamMatrix(entries, data.families)


def _node_eta(engine: _Engine, j: int, c: np.ndarray) -> np.ndarray:
    t = engine.T
    return c[j] + t @ c - t[:, j] * c[j]


def _node_objective(engine: _Engine, j: int, c: np.ndarray, lam: float) -> float:
    eta = _node_eta(engine, j, c)
    fam = engine.families[j]
    y = engine.T[:, j]
    if fam is VariateFamily.BERNOULLI:
        d = np.logaddexp(0.0, eta)
    elif fam is VariateFamily.GAUSSIAN:
        d = 0.5 * eta * eta
    elif fam is VariateFamily.POISSON:
        d = np.exp(eta)
    else:
        if np.any(eta >= 0):
            return -np.inf
        d = -np.log(-eta)
    value = float(np.mean(y * eta - d))
    off = np.sum(c * c) - c[j] * c[j]
    value -= 0.5 * lam * off
    value -= _node_barrier(engine, j, c)[0]
    return value


def _node_barrier(engine: _Engine, j: int, c: np.ndarray):
    """Barrier over constraints supported entirely on node j's coefficients."""
    value = 0.0
    grad = np.zeros(c.size)
    hess = np.zeros((c.size, c.size))
    beta = engine.pen.barrier_beta
    fams = engine.families
    # sign constraints on this row
    for k, fam in enumerate(fams):
        if k == j:
            continue
        key = frozenset((fams[j], fam))
        if key in _SIGN_KEYS and c[k] > 0:
            g = float(c[k])
            value += beta * g**3
            grad[k] += 3 * beta * g**2
            hess[k, k] += 6 * beta * g
    if fams[j] is VariateFamily.EXPONENTIAL:
        g = float(c[j]) + RATE_MARGIN
        if g > 0:
            value += beta * g**3
            grad[j] += 3 * beta * g**2
            hess[j, j] += 6 * beta * g
        bern = [k for k, f in enumerate(fams) if f is VariateFamily.BERNOULLI]
        if bern:
            g = float(c[j])
            parts = []
            for k in bern:
                g += _softplus(float(c[k]))
                parts.append((k, _softplus_grad(float(c[k]))))
            if g > 0:
                value += beta * g**3
                coords = [(j, 1.0)] + parts
                for a, wa in coords:
                    grad[a] += 3 * beta * g**2 * wa
                    for b, wb in coords:
                        hess[a, b] += 6 * beta * g * wa * wb
                for k, s in parts:
                    hess[k, k] += 3 * beta * g**2 * SOFTPLUS_SHARPNESS * s * (1 - s)
    return value, grad, hess


_SIGN_KEYS = {
    frozenset((VariateFamily.POISSON, VariateFamily.POISSON)),
    frozenset((VariateFamily.POISSON, VariateFamily.EXPONENTIAL)),
    frozenset((VariateFamily.EXPONENTIAL, VariateFamily.EXPONENTIAL)),
}


def _node_derivatives(engine: _Engine, j: int, c: np.ndarray, lam: float):
    eta = _node_eta(engine, j, c)
    fam = engine.families[j]
    t = engine.T
    y = t[:, j]
    n = engine.n
    if fam is VariateFamily.BERNOULLI:
        mu = 1.0 / (1.0 + np.exp(-np.clip(eta, -700, 700)))
        w = mu * (1.0 - mu)
    elif fam is VariateFamily.GAUSSIAN:
        mu = eta
        w = np.ones_like(eta)
    elif fam is VariateFamily.POISSON:
        mu = np.exp(eta)
        w = mu
    else:
        mu = -1.0 / eta
        w = 1.0 / (eta * eta)
    r = y - mu
    x = t.copy()
    x[:, j] = 1.0
    g = (x.T @ r) / n
    h = -(x.T @ (x * w[:, None])) / n
    if lam > 0:
        g -= lam * c
        g[j] += lam * c[j]
        ridge = np.full(c.size, lam)
        ridge[j] = 0.0
        h -= np.diag(ridge)
    bval, bgrad, bhess = _node_barrier(engine, j, c)
    g -= bgrad
    h -= bhess
    dead = engine.struct[j]
    if dead.any():
        g[dead] = 0.0
        h[dead, :] = 0.0
        h[:, dead] = 0.0
    return g, h


def run_recovery_experiment(
    sizes: Sequence[int],
    replicates,
    estimators: Sequence[str] = ("ridge", "unpenalized", "nodewise"),
    seed: int = 0,
    experiment: str = "lattice",
    *,
    cv_folds: int = 10,
    cv_grid: Optional[Sequence[float]] = None,
    burn_in: int = 5000,
    thinning: int = 50,
    tau: float = 1e-10,
    workers: int = 1,
    ggm_p: int = 25,
) -> ExperimentReport:
    """Sample, estimate, and score each (size, replicate) cell.

    Per cell the dataset is drawn once by Gibbs sampling (chain seed derived
    deterministically from (seed, n, replicate)), every requested estimator is
    run on it, and the Frobenius error to the true parameter -- plus, on the
    lattice, the count of true edges among the top-36 estimated ones -- is
    recorded.  Estimator failures are recorded in the cell, not raised.

    The harness defaults are desk scale: thinning 50 (the library default
    stays 500) and, unless a grid is passed, 12 log-spaced penalties on
    [1e-4, 1e2].
    """
    sizes = [int(n) for n in sizes]
    if isinstance(replicates, int):
        reps = [replicates] * len(sizes)
    else:
        reps = [int(r) for r in replicates]
        if len(reps) != len(sizes):
            raise ParameterError("need one replicate count per sample size")
    if experiment == "lattice":
        theta_true, edge_set = lattice_theta()
    elif experiment == "ggm":
        theta_true = gaussian_theta_from_precision(banded_precision(ggm_p))
        edge_set = None
    else:
        raise ParameterError(f"unknown experiment {experiment!r}")
    grid = (
        np.asarray(cv_grid, dtype=float)
        if cv_grid is not None
        else default_lambda_grid(12, 1e-4, 1e2)
    )
    base = FitConfig(tau=tau)

    def run_cell(n: int, rep: int) -> list[CellResult]:
        chain_seed = int(
            np.random.SeedSequence(entropy=(seed, n, rep)).generate_state(1, np.uint64)[0]
        )
        cv_seed = int(
            np.random.SeedSequence(entropy=(seed, n, rep, 1)).generate_state(1, np.uint64)[0]
        )
        data = gibbs_chain(
            theta_true,
            ChainConfig(n_samples=n, burn_in=burn_in, thinning=thinning, seed=chain_seed),
        )
        out = []
        lam_opt = None
        ridge_theta = None
        for name in estimators:
            lam_used = None
            edges = None
            max_iters = None
            all_conv = None
            try:
                if name == "ridge":
                    cv = cross_validate(data, grid, cv_folds, cv_seed, base)
                    lam_opt = cv.lambda_opt
                    res = fit(data, replace(base, lam=lam_opt))
                    ridge_theta = res.theta_hat
                    est = res.theta_hat
                    lam_used = lam_opt
                    max_iters = max(cv.max_fit_iterations, res.iterations)
                    all_conv = cv.all_converged and res.converged
                elif name == "unpenalized":
                    warm = ridge_theta
                    res = fit(data, replace(base, lam=0.0, initial_theta=warm))
                    est = res.theta_hat
                    lam_used = 0.0
                    max_iters = res.iterations
                    all_conv = res.converged
                elif name == "nodewise":
                    lam_used = 0.0
                    est = nodewise_baseline(data, lam_used)
                else:
                    raise ParameterError(f"unknown estimator {name!r}")
                error = float(np.linalg.norm(est.entries - theta_true.entries, "fro"))
                if edge_set is not None:
                    top = top_k_edges(est, len(edge_set))
                    edges = len(top.pairs() & edge_set.pairs())
                out.append(
                    CellResult(
                        estimator=name,
                        n=n,
                        replicate=rep,
                        frobenius_error=error,
                        edges_recovered=edges,
                        lambda_used=lam_used,
                        max_fit_iterations=max_iters,
                        all_converged=all_conv,
                    )
                )
            except Exception as exc:
                out.append(
                    CellResult(
                        estimator=name,
                        n=n,
                        replicate=rep,
                        frobenius_error=float("nan"),
                        edges_recovered=None,
                        lambda_used=lam_used,
                        max_fit_iterations=None,
                        all_converged=None,
                        failure=f"{type(exc).__name__}: {exc}",
                    )
                )
        return out

    tasks = [(n, rep) for n, r in zip(sizes, reps) for rep in range(r)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cell_lists = list(pool.map(lambda t: run_cell(*t), tasks))
    else:
        cell_lists = [run_cell(n, rep) for n, rep in tasks]
    cells = tuple(c for cell in cell_lists for c in cell)
    return ExperimentReport(
        experiment=experiment,
        sample_sizes=tuple(sizes),
        replicates=tuple(reps),
        estimators=tuple(estimators),
        seed=int(seed),
        true_edge_count=len(edge_set) if edge_set is not None else 0,
        cells=cells,
    )


def write_report_csv(report: ExperimentReport, path) -> None:
    """Delimited cell table: estimator, n, replicate, frobenius_error, edges_recovered."""
    lines = ["estimator,n,replicate,frobenius_error,edges_recovered"]
    for c in report.cells:
        err = "" if math.isnan(c.frobenius_error) else repr(c.frobenius_error)
        edges = "" if c.edges_recovered is None else str(c.edges_recovered)
        lines.append(f"{c.estimator},{c.n},{c.replicate},{err},{edges}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
