"""PNG renderings of the CSV products, written next to them."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: Path, echo: dict) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Description": json.dumps(echo, sort_keys=True)})
    plt.close(fig)
    return path


def plot_curves(
    path: Path,
    x: Sequence[float],
    curves: Mapping[str, Sequence[float]],
    xlabel: str,
    ylabel: str,
    echo: dict,
    marks: Sequence[float] = (),
    db: bool = False,
) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for name, y in curves.items():
        y = np.asarray(y, dtype=float)
        if db:
            y = 10.0 * np.log10(np.maximum(y, 1e-300) / np.max(y))
        ax.plot(x, y, label=name, marker="o" if len(x) < 30 else None)
    for m in marks:
        ax.axvline(m, color="grey", lw=0.8, ls="--")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    if len(curves) > 1:
        ax.legend()
    return _save(fig, path, echo)


def plot_tradeoff(path: Path, rate: Sequence[float], mi: Sequence[float], alphas: Sequence[float], echo: dict) -> Path:
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    ax.plot(rate, mi, marker="o")
    for r, m, a in zip(rate, mi, alphas):
        if np.isfinite(r) and np.isfinite(m):
            ax.annotate(f"{a:.1f}", (r, m), textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xlabel("average rate (bit/s/Hz)")
    ax.set_ylabel("sensing MI upper bound (bits)")
    ax.grid(alpha=0.3)
    return _save(fig, path, echo)
