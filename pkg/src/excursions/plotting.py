"""Static SVG figures: empirical CDFs and modulus grids."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Mapping, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps reruns byte-identical
_SVG_META = {"Date": None, "Creator": None}
matplotlib.rcParams["svg.hashsalt"] = "excursions"


def ecdf_svg(samples: Mapping[str, Sequence[float]], target, title: str = "",
             xlabel: str = "") -> Path:
    """One step curve per labelled sample."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for label, values in samples.items():
        v = np.sort(np.asarray(values, dtype=float))
        v = v[~np.isnan(v)]
        if len(v) == 0:
            continue
        ax.step(v, np.arange(1, len(v) + 1) / len(v), where="post", label=label, lw=1.1)
    ax.set_ylim(0, 1)
    ax.set_ylabel("empirical CDF")
    ax.set_xlabel(xlabel)
    ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    fig.tight_layout()
    target = Path(target)
    fig.savefig(target, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return target


def modulus_grid_svg(curves: Dict[str, Sequence[Tuple[float, float]]], target,
                     title: str = "", ylabel: str = "modulus") -> Path:
    """Curves of ``(delta, value)`` pairs on log-scaled delta."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for label, pts in curves.items():
        pts = sorted(pts)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=label)
    ax.set_xscale("log")
    ax.set_xlabel("delta")
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    fig.tight_layout()
    target = Path(target)
    fig.savefig(target, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return target
