"""Figure rendering for the report paths.

Every plotting helper takes already-computed rows and writes a PNG next to
the CSV it illustrates.  Figures are a convenience layer on top of the CSV
contract: the CSV bytes are identical whether or not figures are rendered.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_trajectory_summary",
    "plot_nonadaptive_risk",
    "plot_gap_sweep",
    "plot_rate_fit",
]


def _finish(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_trajectory_summary(summary_rows, path, title="mean squared error vs rounds"):
    """Log-log mean error trajectory with a stderr band."""
    ks = np.array([row[0] for row in summary_rows], dtype=float)
    means = np.array([row[1] for row in summary_rows], dtype=float)
    errs = np.array([row[2] for row in summary_rows], dtype=float)
    good = np.isfinite(means) & (means > 0)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(ks[good], means[good], "o-", ms=4, color="tab:blue", label="mean sq. error")
    band_lo = np.maximum(means[good] - errs[good], 1e-300)
    ax.fill_between(ks[good], band_lo, means[good] + errs[good], alpha=0.25, color="tab:blue")
    ax.set_xlabel("rounds k")
    ax.set_ylabel("squared error")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return _finish(fig, path)


def plot_nonadaptive_risk(rows, bound, path):
    """Histogram of per-replicate squared errors with the guarantee line."""
    vals = np.array([row[2] for row in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.hist(vals, bins=min(50, max(10, vals.size // 20)), color="tab:orange", alpha=0.8)
    ax.axvline(bound, color="k", ls="--", label=f"risk bound = {bound:.4g}")
    ax.axvline(vals.mean(), color="tab:red", ls="-", label=f"mean = {vals.mean():.4g}")
    ax.set_xlabel("squared error")
    ax.set_ylabel("replicates")
    ax.set_title("non-adaptive block estimator risk")
    ax.legend()
    return _finish(fig, path)


def plot_gap_sweep(sweep_rows, adaptive_fit, nonadaptive_fit, path):
    """Risk vs dimension per strategy, normalized by the round budget."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    styles = {"adaptive": ("tab:blue", "o"), "nonadaptive": ("tab:orange", "s")}
    for strategy, (color, marker) in styles.items():
        pts = [(row[0], row[1] * row[3]) for row in sweep_rows if row[2] == strategy]
        if not pts:
            continue
        ds = np.array([p[0] for p in pts], dtype=float)
        ys = np.array([p[1] for p in pts], dtype=float)
        fit = adaptive_fit if strategy == "adaptive" else nonadaptive_fit
        ax.loglog(ds, ys, marker, color=color, ls="none",
                  label=f"{strategy} (d-exponent {fit.slope:.2f})")
        grid = np.linspace(ds.min(), ds.max(), 50)
        ax.loglog(grid, np.exp(fit.intercept) * grid**fit.slope, "-", color=color, alpha=0.6)
    ax.set_xlabel("dimension d")
    ax.set_ylabel("k * mean risk")
    ax.set_title("adaptive vs non-adaptive risk scaling")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return _finish(fig, path)


def plot_rate_fit(points, fit, path, xlabel="x", ylabel="y"):
    """Scatter of the fitted points with the power-law fit line, log-log."""
    xs = np.array([p[0] for p in points], dtype=float)
    ys = np.array([p[1] for p in points], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(xs, ys, "o", color="tab:blue", label="data")
    grid = np.linspace(xs.min(), xs.max(), 100)
    ax.loglog(grid, np.exp(fit.intercept) * grid**fit.slope, "-", color="tab:red",
              label=f"slope {fit.slope:.3f} +- {fit.stderr:.3f}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(f"power-law fit (R^2 = {fit.r_squared:.4f})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return _finish(fig, path)
