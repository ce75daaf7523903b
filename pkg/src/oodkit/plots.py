"""Figure rendering for the report path (headless Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update(
    {
        "figure.dpi": 120,
        "savefig.dpi": 120,
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.3,
    }
)


def render_metric_bars(summary_rows, path) -> None:
    """Grouped AUROC / FAR95 bars, one group per (loss mode, scorer)."""
    labels = [f"{r.loss_mode}+{r.scorer}\n{r.id_dataset} vs {r.ood_dataset}" for r in summary_rows]
    auroc_vals = [r.auroc for r in summary_rows]
    far95_vals = [r.far95 for r in summary_rows]
    positions = np.arange(len(labels))

    fig, (ax_auroc, ax_far) = plt.subplots(1, 2, figsize=(max(6.0, 1.1 * len(labels) + 2), 3.5))
    ax_auroc.bar(positions, auroc_vals, color="#3b6ea5")
    ax_auroc.set_title("AUROC (higher is better)")
    ax_auroc.set_ylim(0.0, 1.02)
    ax_far.bar(positions, far95_vals, color="#a54d3b")
    ax_far.set_title("FAR95 (lower is better)")
    ax_far.set_ylim(0.0, 1.02)
    for ax in (ax_auroc, ax_far):
        ax.set_xticks(positions)
        ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    fig.tight_layout()
    fig.savefig(Path(path))
    plt.close(fig)


def render_projection(points: np.ndarray, groups, path) -> None:
    """Scatter of the 2-D PCA projection, one color per group label."""
    points = np.asarray(points, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 4))
    for group in sorted(set(groups)):
        mask = np.array([g == group for g in groups])
        ax.scatter(points[mask, 0], points[mask, 1], s=12, alpha=0.7, label=str(group))
    ax.set_xlabel("component 1")
    ax.set_ylabel("component 2")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(Path(path))
    plt.close(fig)
