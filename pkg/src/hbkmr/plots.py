"""SVG rendering for curves, interval tables, and residual panels.

Thin matplotlib wrappers shared by the command-line tool and the demo
scripts. Everything writes straight to SVG files with the non-interactive
backend, so they work headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import Dataset
from .diagnostics import ResidualReport
from .inference import EffectEstimate

__all__ = [
    "save_curve_svg",
    "save_intervals_svg",
    "save_residuals_svg",
]


def save_curve_svg(
    path: str,
    estimates: list[EffectEstimate],
    title: str,
    xlabel: str,
    ylabel: str = "h",
    log_x: bool = True,
) -> None:
    """Line plot with a shaded 95% band for a cross-section curve."""
    x = np.array([e.x if e.x is not None else i for i, e in enumerate(estimates)])
    est = np.array([e.estimate for e in estimates])
    lo = np.array([e.lower95 for e in estimates])
    hi = np.array([e.upper95 for e in estimates])
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.fill_between(x, lo, hi, alpha=0.25, linewidth=0, label="95% interval")
    ax.plot(x, est, lw=1.6)
    if log_x and np.all(x > 0):
        ax.set_xscale("log")
    ax.axhline(0.0, color="0.6", lw=0.7, ls=":")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def save_intervals_svg(
    path: str,
    estimates: list[EffectEstimate],
    title: str,
    ylabel: str,
    overlay: list[EffectEstimate] | None = None,
    overlay_label: str = "comparison",
) -> None:
    """Point-and-interval plot for a table of contrasts or predictions."""
    n = len(estimates)
    idx = np.arange(n, dtype=float)
    fig, ax = plt.subplots(figsize=(max(5.5, 0.5 * n), 4.0))
    ax.errorbar(
        idx,
        [e.estimate for e in estimates],
        yerr=[
            [e.estimate - e.lower95 for e in estimates],
            [e.upper95 - e.estimate for e in estimates],
        ],
        fmt="o",
        capsize=3,
        ms=4,
        label="estimate",
    )
    if overlay is not None:
        ax.errorbar(
            idx + 0.18,
            [e.estimate for e in overlay],
            yerr=[
                [e.estimate - e.lower95 for e in overlay],
                [e.upper95 - e.estimate for e in overlay],
            ],
            fmt="s",
            capsize=3,
            ms=4,
            alpha=0.75,
            label=overlay_label,
        )
        ax.legend(frameon=False, fontsize=8)
    ax.axhline(0.0, color="0.6", lw=0.7, ls=":")
    ax.set_xticks(idx)
    ax.set_xticklabels([e.label for e in estimates], rotation=45, ha="right", fontsize=7)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def save_residuals_svg(
    path: str,
    report: ResidualReport,
    dataset: Dataset,
    max_panels: int = 6,
) -> None:
    """Absolute residuals against fitted values and the screened predictors."""
    panels: list[tuple[str, np.ndarray]] = [("fitted", report.fitted)]
    for assoc in report.associations:
        if assoc.kind != "continuous" or len(panels) >= max_panels:
            continue
        if assoc.name in dataset.z_names:
            col = dataset.Z[:, dataset.z_names.index(assoc.name)]
        else:
            col = dataset.X[:, dataset.x_names.index(assoc.name)]
        panels.append((assoc.name, col))
    n = len(panels)
    ncols = min(n, 3)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(3.2 * ncols, 2.8 * nrows), squeeze=False
    )
    abs_resid = np.abs(report.residuals)
    for k, (name, col) in enumerate(panels):
        ax = axes[k // ncols][k % ncols]
        ax.scatter(col, abs_resid, s=8, alpha=0.6, linewidths=0)
        ax.set_xlabel(name, fontsize=8)
        ax.set_ylabel("|residual|", fontsize=8)
        ax.tick_params(labelsize=7)
    for k in range(n, nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.suptitle(f"residual screen ({report.method})", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
