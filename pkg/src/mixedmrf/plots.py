"""Matplotlib figure rendering for the CLI report paths (Agg backend)."""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import ExperimentReport
from .model import ParamMatrix
from .selection import CvResult

_PNG_METADATA = {"Software": None}  # keep output files byte-stable


def _save(fig, path) -> None:
    kwargs = {}
    if str(path).lower().endswith(".png"):
        kwargs["metadata"] = _PNG_METADATA
    fig.savefig(path, dpi=150, bbox_inches="tight", **kwargs)
    plt.close(fig)


def save_heatmap(theta: ParamMatrix, path, names: Optional[Sequence[str]] = None) -> None:
    """Signed heatmap of the parameter matrix, symmetric color scale."""
    e = theta.entries
    vmax = max(float(np.max(np.abs(e))), 1e-12)
    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    im = ax.imshow(e, cmap="RdBu_r", vmin=-vmax, vmax=vmax, interpolation="nearest")
    fig.colorbar(im, ax=ax, label="interaction weight")
    labels = list(names) if names else [f"x{j + 1}" for j in range(theta.p)]
    ticks = np.arange(theta.p)
    ax.set_xticks(ticks)
    ax.set_yticks(ticks)
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_yticklabels(labels, fontsize=6)
    ax.set_title("estimated interaction matrix")
    _save(fig, path)


def save_error_curves(report: ExperimentReport, path) -> None:
    """Mean Frobenius error per estimator as a function of the sample size."""
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for name in report.estimators:
        xs, means, sds = [], [], []
        for n in report.sample_sizes:
            errs = report.errors(name, n)
            if not errs:
                continue
            xs.append(n)
            means.append(float(np.mean(errs)))
            sds.append(float(np.std(errs, ddof=1)) if len(errs) > 1 else 0.0)
        if xs:
            ax.errorbar(xs, means, yerr=sds, marker="o", capsize=3, label=name)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("Frobenius error")
    ax.set_title(f"{report.experiment} recovery error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def save_cv_curve(cv: CvResult, path) -> None:
    """Mean +/- sd MSPE over the penalty grid with the selected value marked."""
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    lams = np.asarray(cv.lambda_grid)
    mean = np.asarray(cv.mean_mspe)
    sd = np.asarray(cv.sd_mspe)
    ax.errorbar(lams, mean, yerr=sd, marker="o", markersize=3, capsize=2)
    ax.axvline(cv.lambda_opt, color="crimson", linestyle="--",
               label=f"selected = {cv.lambda_opt:.3g}")
    ax.set_xscale("log")
    ax.set_xlabel("ridge penalty")
    ax.set_ylabel("mean squared prediction error")
    ax.set_title(f"{cv.folds}-fold cross-validation")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)
