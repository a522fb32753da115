"""Deterministic SVG renderings for diagnostics output."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    # Fixed hash salt and stripped date metadata keep SVG output
    # byte-identical across reruns.
    matplotlib.rcParams["svg.hashsalt"] = "exposure-lens"
    import matplotlib.pyplot as plt

    return plt


def heatmap_svg(matrix: np.ndarray, labels: list[str], path: str | Path) -> None:
    """Correlation heatmap with annotated cells."""
    plt = _pyplot()
    k = matrix.shape[0]
    fig, ax = plt.subplots(figsize=(1.0 + 0.6 * k, 0.8 + 0.6 * k))
    im = ax.imshow(matrix, vmin=-1, vmax=1, cmap="RdBu_r")
    ax.set_xticks(range(k), labels, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(k), labels, fontsize=8)
    for i in range(k):
        for j in range(k):
            ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center", fontsize=7)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def forest_svg(gap_result, path: str | Path) -> None:
    """Forest plot of alignment gaps with bootstrap intervals."""
    plt = _pyplot()
    rows = gap_result.outcomes
    order = np.argsort([abs(r.delta) for r in rows])[::-1]
    fig, ax = plt.subplots(figsize=(7, 1.0 + 0.4 * len(rows)))
    for pos, idx in enumerate(order):
        r = rows[idx]
        y = len(rows) - 1 - pos
        color = "firebrick" if gap_result.raw_reject[idx] else "gray"
        marker = "s" if gap_result.holm_reject[idx] else "o"
        ax.plot([r.ci_low, r.ci_high], [y, y], color=color, lw=1.5)
        ax.plot([r.delta], [y], marker=marker, color=color, ms=5)
        ax.text(-0.02, y, r.label, ha="right", va="center", fontsize=8, transform=ax.get_yaxis_transform())
    ax.axvline(0.0, color="black", lw=0.8, ls="--")
    ax.set_yticks([])
    ax.set_xlabel("alignment gap (rank correlation difference)")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
