"""Figure rendering for the report-style CLI outputs.

Each helper takes already-computed table data and writes one PNG next to
the delimited output. Rendering is headless (Agg backend) so the CLI can
run in batch jobs and CI.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["fidelity_histogram", "scaling_curves", "training_curves"]


def fidelity_histogram(direct, corrected, path) -> None:
    """Overlaid histograms of the direct and corrected fidelity populations."""
    direct = np.asarray(direct, dtype=float)
    corrected = np.asarray(corrected, dtype=float)
    lo = min(direct.min(), corrected.min())
    bins = np.linspace(min(lo, 0.999) - 1e-4, 1.0 + 1e-4, 60)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.hist(direct, bins=bins, alpha=0.6, color="#c44e52",
            label=f"direct (mean {direct.mean():.4f})")
    ax.hist(corrected, bins=bins, alpha=0.6, color="#4c72b0",
            label=f"corrected (mean {corrected.mean():.4f})")
    ax.set_xlabel("fidelity")
    ax.set_ylabel("count")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def training_curves(history, path) -> None:
    """Loss on the left axis, train/test accuracy on the right."""
    epochs = [rec.epoch for rec in history]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(epochs, [rec.train_loss for rec in history], color="#55a868",
            label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax2 = ax.twinx()
    ax2.plot(epochs, [rec.train_acc for rec in history], color="#4c72b0",
             label="train accuracy")
    ax2.plot(epochs, [rec.test_acc for rec in history], color="#c44e52",
             label="test accuracy")
    ax2.set_ylabel("accuracy")
    ax2.set_ylim(0.0, 1.02)
    lines = ax.get_lines() + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], loc="center right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def scaling_curves(rows, path) -> None:
    """Energy per op versus mode count for each emitted energy column."""
    n = [row["n"] for row in rows]
    series = [key for key in rows[0] if key != "n"]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for key in series:
        ax.loglog(n, [row[key] for row in rows], marker="o", label=key)
    ax.set_xlabel("modes per layer")
    ax.set_ylabel("energy per op (J)")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
