"""Figure rendering to SVG with reproducible bytes."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 8,
    "axes.labelsize": 8,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "lines.linewidth": 1.0,
    "image.cmap": "RdBu_r",
    "svg.fonttype": "none",
    "svg.hashsalt": "latentflow",
    "path.simplify": False,
}
FIELD_CMAP = "viridis"
ERROR_CMAP = "RdBu_r"


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def _symmetric_limits(a):
    m = float(np.max(np.abs(a))) if np.size(a) else 1.0
    return (-m, m) if m > 0 else (-1.0, 1.0)


def latent_profile(latent, path, title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 2.4))
        for j, label in enumerate(latent.labels):
            ax.plot(latent.times, latent.coords[:, j], label=label)
        ax.set_xlabel("t")
        ax.set_ylabel("latent")
        if latent.dim > 1:
            ax.legend(loc="upper right", frameon=False)
        ax.set_title(title or f"{latent.source} latent profile")
        fig.tight_layout()
        return _save(fig, path)


def error_heatmap(times, nodes, error, path, title: str = "pointwise error") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 2.6))
        vmin, vmax = _symmetric_limits(error)
        im = ax.pcolormesh(times, nodes, np.asarray(error).T, cmap=ERROR_CMAP,
                           vmin=vmin, vmax=vmax, shading="nearest", rasterized=False)
        fig.colorbar(im, ax=ax, label="pred - true")
        ax.set_xlabel("t")
        ax.set_ylabel("x")
        ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def prediction_panels(times, nodes, truth, pred, path, title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 1, figsize=(5.0, 4.2), sharex=True)
        lo = float(min(np.min(truth), np.min(pred)))
        hi = float(max(np.max(truth), np.max(pred)))
        for ax, data, name in zip(axes, (truth, pred), ("true", "predicted")):
            im = ax.pcolormesh(times, nodes, np.asarray(data).T, cmap=FIELD_CMAP,
                               vmin=lo, vmax=hi, shading="nearest")
            ax.set_ylabel("x")
            ax.set_title(f"{title} {name}".strip())
            fig.colorbar(im, ax=ax, label="u")
        axes[-1].set_xlabel("t")
        fig.tight_layout()
        return _save(fig, path)


def latent_views(latent, path, title: str = "") -> Path:
    """Three 2-D projections of a 3-D latent trajectory (fewer axes are padded with time)."""
    coords = latent.coords
    labels = list(latent.labels)
    if latent.dim < 3:
        coords = np.column_stack([latent.times, coords])
        labels = ["t", *labels]
    pairs = [(0, 1), (0, 2), (1, 2)] if coords.shape[1] >= 3 else [(0, 1)]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(pairs), figsize=(2.3 * len(pairs) + 0.6, 2.4),
                                 squeeze=False)
        for ax, (a, b) in zip(axes[0], pairs):
            ax.plot(coords[:, a], coords[:, b], lw=0.6)
            ax.plot(coords[:1, a], coords[:1, b], "o", ms=3)
            ax.set_xlabel(labels[a])
            ax.set_ylabel(labels[b])
        fig.suptitle(title or f"{latent.source} latent trajectory")
        fig.tight_layout()
        return _save(fig, path)


def loss_curve(history, path, title: str = "training loss") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.4))
        ax.semilogy(np.arange(1, len(history) + 1), history)
        ax.set_xlabel("epoch")
        ax.set_ylabel("MSE (normalized)")
        ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)
