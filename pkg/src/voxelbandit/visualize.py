# src/voxelbandit/visualize.py

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .core import Design, RunResult  # noqa: E402

Curve = List[Tuple[float, float]]


def _save(fig, save_path: str | Path) -> Path:
    p = Path(save_path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(p, format="svg")
    plt.close(fig)
    return p


# Learning curves


def plot_learning_curves(
    results: Dict[int, RunResult],
    save_path: str | Path,
    title: str = "Best payoff so far",
) -> Path:
    """
    Best-so-far curve of every seed plus the across-seed mean.

    Args:
        results: RunResult per seed.
        save_path: output SVG file.
        title: axes title.
    """
    fig, ax = plt.subplots(figsize=(8, 5))
    for seed, result in sorted(results.items()):
        best = np.array([r.best_so_far for r in result.trace])
        ax.plot(np.arange(1, best.size + 1), best, linewidth=1, alpha=0.5, label=f"seed {seed}")

    if results:
        mean = mean_curve(list(results.values()))
        ax.plot(np.arange(1, mean.size + 1), mean, color="k", linewidth=2, label="mean")

    ax.set_xlabel("evaluations")
    ax.set_ylabel("best payoff")
    ax.set_title(title)
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, save_path)


def plot_robustness(curves: Dict[int, Curve], save_path: str | Path) -> Path:
    """Mean payoff against voxel error probability, one line per seed."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for seed, curve in sorted(curves.items()):
        probs = [p for p, _ in curve]
        means = [m for _, m in curve]
        ax.plot(probs, means, marker="o", label=f"seed {seed}")
    ax.set_xlabel("error probability")
    ax.set_ylabel("mean payoff")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, save_path)


def plot_variance(variance: Dict[int, np.ndarray], window: int, save_path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(8, 4))
    for seed, v in sorted(variance.items()):
        ax.plot(np.arange(window, window + v.size), v, label=f"seed {seed}")
    ax.set_xlabel("evaluations")
    ax.set_ylabel(f"design variance (window {window})")
    ax.legend()
    fig.tight_layout()
    return _save(fig, save_path)


# Designs and fields


def render_design(design: Design, save_path: str | Path, title: Optional[str] = None) -> Path:
    """Material voxels dark, air light; 3D designs are drawn layer by layer."""
    layers = design.grid()
    fig, axes = plt.subplots(1, layers.shape[0], figsize=(4 * layers.shape[0], 4), squeeze=False)
    for z, ax in enumerate(axes[0]):
        ax.imshow(layers[z], cmap="Greys", origin="lower", vmin=0, vmax=1,
                  interpolation="nearest")
        ax.set_xticks([])
        ax.set_yticks([])
        if layers.shape[0] > 1:
            ax.set_title(f"z = {z}")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, save_path)


def render_field(ez: np.ndarray, save_path: str | Path, dx: float | None = None) -> Path:
    """Ez snapshot with a symmetric colour scale."""
    field = np.asarray(ez, dtype=float).T
    limit = float(np.max(np.abs(field))) or 1.0
    fig, ax = plt.subplots(figsize=(6, 6 * field.shape[0] / max(field.shape[1], 1)))
    extent = None
    if dx is not None:
        extent = (0.0, field.shape[1] * dx * 1e6, 0.0, field.shape[0] * dx * 1e6)
        ax.set_xlabel("x [um]")
        ax.set_ylabel("y [um]")
    ax.imshow(field, cmap="RdBu", origin="lower", vmin=-limit, vmax=limit, extent=extent)
    fig.tight_layout()
    return _save(fig, save_path)


def mean_curve(results: Sequence[RunResult]) -> np.ndarray:
    """Across-run mean of best-so-far, truncated to the shortest run."""
    length = min(len(r.trace) for r in results)
    return np.mean([[rec.best_so_far for rec in r.trace[:length]] for r in results], axis=0)
