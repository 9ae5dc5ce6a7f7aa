"""Figure rendering for sweep results (file output only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LABELS = {
    "x1": "base only",
    "x12": "bundle",
    "x3": "rival base",
    "total": "total adoption",
    "eta_star": "optimal coverage",
}


def plot_sweep(rows, variable: str, path, title: str = "", columns=("x1", "x12", "total")):
    """Line plot of adoption columns against the swept variable, written to ``path``."""
    xs = [r["value"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for col in columns:
        if rows and col in rows[0]:
            ax.plot(xs, [r[col] for r in rows], label=LABELS.get(col, col))
    ax.set_xlabel(variable)
    ax.set_ylabel("fraction of users")
    if title:
        ax.set_title(title, fontsize=9)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    # no timestamp or version metadata, so identical data gives identical bytes
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path
