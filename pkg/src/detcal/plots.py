"""Matplotlib figure rendering for report outputs.

Figures are written next to the delimited reports. PNG metadata is pinned so
repeated runs produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["save_reliability_diagram", "save_ece_comparison"]

_PNG_METADATA = {"Software": "detcal"}


def save_reliability_diagram(bins, path, title="Reliability diagram"):
    """Bar chart of per-bin precision against the identity diagonal."""
    centers = [(b.lower + b.upper) / 2.0 for b in bins]
    width = bins[0].upper - bins[0].lower if bins else 0.1
    precisions = [b.precision if b.count else 0.0 for b in bins]
    confidences = [b.mean_confidence if b.count else 0.0 for b in bins]

    fig, ax = plt.subplots(figsize=(5, 5))
    ax.bar(centers, precisions, width=width * 0.92, color="#4878cf",
           edgecolor="black", linewidth=0.5, label="precision")
    ax.plot([0, 1], [0, 1], "k--", linewidth=1, label="perfect calibration")
    ax.plot(centers, confidences, "o-", color="#d65f5f", markersize=3,
            linewidth=1, label="mean confidence")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("confidence")
    ax.set_ylabel("precision")
    ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def save_ece_comparison(rows, path, title="Expected calibration error"):
    """Grouped bars of uncalibrated vs calibrated ECE per detector label.

    `rows` is a list of (label, ece_before, ece_after).
    """
    labels = [r[0] for r in rows]
    before = [r[1] for r in rows]
    after = [r[2] for r in rows]
    x = range(len(rows))

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar([i - 0.18 for i in x], before, width=0.36, color="#d65f5f", label="uncalibrated")
    ax.bar([i + 0.18 for i in x], after, width=0.36, color="#4878cf", label="calibrated")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels)
    ax.set_ylabel("ECE")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
