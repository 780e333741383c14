"""Matplotlib rendering for the CLI report paths.

Every report-producing subcommand drops a PNG next to its delimited output.
The Agg backend is forced before pyplot loads so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = [
    "save_sweep_figure",
    "save_lag_figure",
    "save_metrics_figure",
    "save_attention_figure",
    "save_loss_figure",
    "save_rdm_figure",
]


def _finish(fig, path) -> str:
    path = Path(path)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return str(path)


def save_sweep_figure(sweep, path, title="Accuracy vs synchrony threshold"):
    fig, ax1 = plt.subplots(figsize=(6, 4))
    xs = [t for t, _, m in sweep.rows() if m is not None]
    ys = [m for _, _, m in sweep.rows() if m is not None]
    ax1.plot(xs, ys, "o-", color="tab:blue")
    ax1.set_xlabel("synchrony threshold")
    ax1.set_ylabel("mean R over surviving voxels", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(sweep.thresholds, sweep.voxel_counts, "s--", color="tab:gray", alpha=0.6)
    ax2.set_ylabel("voxel count", color="tab:gray")
    ax1.set_title(title)
    return _finish(fig, path)


def save_lag_figure(results, best_lag, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    lags = [r[0] for r in results]
    means = [r[1] for r in results]
    stds = [r[2] for r in results]
    ax.errorbar(lags, means, yerr=stds, fmt="o-", capsize=4)
    ax.axvline(best_lag, color="tab:red", linestyle=":", label=f"best lag = {best_lag}")
    ax.set_xlabel("lag (time steps)")
    ax.set_ylabel("cross-validated mean R")
    ax.set_title("Response delay estimation")
    ax.legend()
    return _finish(fig, path)


def save_metrics_figure(rows, path, title="Saliency metrics"):
    # rows: (metric, mean, sem, n)
    fig, ax = plt.subplots(figsize=(6, 4))
    names = [r[0] for r in rows]
    means = [r[1] for r in rows]
    sems = [r[2] for r in rows]
    ax.bar(names, means, yerr=sems, capsize=4, color="tab:blue", alpha=0.8)
    ax.set_ylabel("mean over frames")
    ax.set_title(title)
    return _finish(fig, path)


def save_attention_figure(maps, path, titles=None, ncols=4):
    maps = list(maps)
    n = len(maps)
    ncols = min(ncols, max(n, 1))
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(3 * ncols, 2.4 * nrows), squeeze=False)
    for i in range(nrows * ncols):
        ax = axes[i // ncols][i % ncols]
        ax.axis("off")
        if i < n:
            ax.imshow(maps[i], cmap="viridis")
            if titles:
                ax.set_title(titles[i], fontsize=8)
    return _finish(fig, path)


def save_loss_figure(trace, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    epochs = [row[0] for row in trace]
    ax.plot(epochs, [row[1] for row in trace], label="train")
    if any(row[2] is not None for row in trace):
        ax.plot(epochs, [row[2] for row in trace], label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean squared error")
    ax.set_yscale("log")
    ax.set_title("Training loss")
    ax.legend()
    return _finish(fig, path)


def save_rdm_figure(model_rdm, neural_rdm, tau, path):
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.6))
    for ax, rdm, name in zip(axes, (model_rdm, neural_rdm), ("model", "neural")):
        im = ax.imshow(rdm, cmap="magma", vmin=0, vmax=2)
        ax.set_title(f"{name} RDM")
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.suptitle(f"tau_A = {tau:.4f}")
    return _finish(fig, path)
