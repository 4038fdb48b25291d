"""Figures for the experiment presets, rendered headless to SVG or PNG.

Uses the object-oriented matplotlib API (no pyplot state), so it is safe to
call from worker processes. SVG output carries no date and a fixed hash salt,
which keeps reruns byte-stable.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

matplotlib.rcParams["svg.hashsalt"] = "pocmt"

STYLE = {
    "honest": "#1f77b4",
    "adversarial": "#d62728",
    "neutral": "#444444",
}


def _figure(width: float = 6.0, height: float = 3.6):
    fig = Figure(figsize=(width, height))
    ax = fig.add_subplot(1, 1, 1)
    ax.grid(True, alpha=0.3, linewidth=0.6)
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)
    return fig, ax


def _save(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    meta = {"Date": None} if path.suffix == ".svg" else None
    fig.savefig(path, metadata=meta)
    return path


def plot_drift(epochs: np.ndarray, w_h: np.ndarray, w_a: np.ndarray,
               path: str | Path) -> Path:
    """Honest and adversarial total weight over time, with their gap."""
    fig, ax = _figure()
    ax.plot(epochs, w_h, color=STYLE["honest"], label="$W_H$")
    ax.plot(epochs, w_a, color=STYLE["adversarial"], label="$W_A$")
    ax.plot(epochs, w_h - w_a, color=STYLE["neutral"], linestyle="--", label="$W_H - W_A$")
    ax.set_xlabel("epoch")
    ax.set_ylabel("total commitment score")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_capacity_leader(m: Sequence[float], mean: Sequence[float], std: Sequence[float],
                         path: str | Path) -> Path:
    fig, ax = _figure()
    ax.errorbar(m, mean, yerr=std, color=STYLE["adversarial"], marker="o", capsize=3)
    ax.set_xlabel("adversary humans $m$")
    ax.set_ylabel("adversarial leader share")
    ax.set_ylim(bottom=0)
    return _save(fig, path)


def plot_capacity_weight(m: Sequence[float], leader: Sequence[float], weight: Sequence[float],
                         path: str | Path) -> Path:
    """Leader share against final weight share across the capacity sweep."""
    fig, ax = _figure()
    ax.plot(m, leader, color=STYLE["adversarial"], marker="o", label="leader share")
    ax.plot(m, weight, color=STYLE["neutral"], marker="s", linestyle="--",
            label="final weight share")
    ax.set_xlabel("adversary humans $m$")
    ax.set_ylabel("adversarial share")
    ax.set_ylim(bottom=0)
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_fairness(expected: np.ndarray, empirical: np.ndarray, path: str | Path) -> Path:
    fig, ax = _figure(4.2, 4.0)
    ax.scatter(expected, empirical, s=12, color=STYLE["honest"])
    lo = float(min(expected.min(), empirical.min()))
    hi = float(max(expected.max(), empirical.max()))
    ax.plot([lo, hi], [lo, hi], color=STYLE["neutral"], linewidth=0.8)
    ax.set_xlabel("exact win probability (mean over epochs)")
    ax.set_ylabel("empirical leader frequency")
    return _save(fig, path)


def plot_ablation(lambdas: Sequence[float], mean: Sequence[float], std: Sequence[float],
                  path: str | Path) -> Path:
    fig, ax = _figure()
    ax.errorbar(lambdas, mean, yerr=std, color=STYLE["adversarial"], marker="o", capsize=3)
    ax.set_xscale("log")
    ax.set_xlabel(r"availability decay rate $\lambda$")
    ax.set_ylabel("final adversarial weight share")
    return _save(fig, path)


def plot_reorg(depths: Sequence[int], freq: Sequence[float], path: str | Path) -> Path:
    fig, ax = _figure()
    ax.plot(depths, freq, color=STYLE["adversarial"], marker="o")
    ax.set_xlabel("reorg depth $k$")
    ax.set_ylabel(r"fraction of publications displacing $\geq k$")
    ax.set_ylim(bottom=0)
    return _save(fig, path)
