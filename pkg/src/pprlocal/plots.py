"""Render report figures next to the delimited outputs.

Every renderer takes already-computed rows or result objects and writes a
PNG sibling of the CSV it accompanies.  Uses the Agg backend so the CLI
works headless.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 (backend must be set first)
import numpy as np  # noqa: E402

_MODE_STYLE = {"ppr": ("tab:blue", "o"), "appr": ("tab:orange", "s"),
               "rppr": ("tab:green", "^")}


def _grouped(rows: list[dict], metric: str, modes) -> dict:
    by_value: dict = {}
    for row in rows:
        if row.get("error"):
            continue
        by_value.setdefault(row["sweep_value"], {m: [] for m in modes})
        for mode in modes:
            value = row.get(f"{metric}_{mode}")
            if value is not None and not (isinstance(value, float) and math.isnan(value)):
                by_value[row["sweep_value"]][mode].append(float(value))
    return by_value


def _sweep_figure(rows, config, metric: str, ylabel: str, out_path: Path) -> Path | None:
    grouped = _grouped(rows, metric, config.modes)
    if not grouped:
        return None
    xs = sorted(grouped)
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for mode in config.modes:
        means = [float(np.mean(grouped[x][mode])) if grouped[x][mode] else np.nan for x in xs]
        sds = [float(np.std(grouped[x][mode])) if grouped[x][mode] else 0.0 for x in xs]
        color, marker = _MODE_STYLE.get(mode, ("tab:gray", "x"))
        ax.errorbar(xs, means, yerr=sds, label=mode, color=color, marker=marker,
                    capsize=3, linewidth=1.2)
    ax.set_xlabel(config.sweep_variable)
    ax.set_ylabel(ylabel)
    ax.set_title(config.experiment)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_experiment(rows: list[dict], config, csv_path) -> list[Path]:
    """Accuracy and error sweeps as ``<stem>_accuracy.png`` / ``<stem>_ree.png``."""
    base = Path(csv_path)
    written = []
    for metric, ylabel, suffix in (("acc", "recovery accuracy", "_accuracy.png"),
                                   ("ree", "relative entrywise error", "_ree.png")):
        target = base.with_name(base.stem + suffix)
        path = _sweep_figure(rows, config, metric, ylabel, target)
        if path is not None:
            written.append(path)
    return written


def plot_sensitivity(result, out_path) -> Path:
    """Heatmap of pairwise cluster overlap across teleportation constants."""
    out_path = Path(out_path)
    m = len(result.alphas)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    image = ax.imshow(result.overlap, vmin=0.0, vmax=1.0, cmap="viridis")
    labels = [f"{a:g}" for a in result.alphas]
    ax.set_xticks(range(m), labels)
    ax.set_yticks(range(m), labels)
    ax.set_xlabel("teleportation constant")
    ax.set_ylabel("teleportation constant")
    for i in range(m):
        for j in range(m):
            ax.text(j, i, f"{result.overlap[i, j]:.2f}", ha="center", va="center",
                    color="white" if result.overlap[i, j] < 0.6 else "black", fontsize=8)
    ax.set_title(f"cluster overlap (n={result.n}, {result.mode})")
    fig.colorbar(image, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_cluster_scatter(cluster, out_path, seeds=()) -> Path:
    """In-degree versus raw PPR mass for a ranked cluster, seeds highlighted."""
    out_path = Path(out_path)
    seeds = set(seeds)
    degrees = np.array([max(entry[3], 1) for entry in cluster.entries], dtype=float)
    masses = np.array([entry[1] for entry in cluster.entries], dtype=float)
    is_seed = np.array([entry[0] in seeds for entry in cluster.entries])
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.scatter(degrees[~is_seed], masses[~is_seed], s=14, alpha=0.6, label="members")
    if is_seed.any():
        ax.scatter(degrees[is_seed], masses[is_seed], s=40, color="tab:red",
                   marker="*", label="seeds")
    ax.set_xscale("log")
    if masses.min(initial=1.0) > 0:
        ax.set_yscale("log")
    ax.set_xlabel("in-degree")
    ax.set_ylabel("PPR mass")
    ax.set_title(f"top {len(cluster)} by {cluster.mode}")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
