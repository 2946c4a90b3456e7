# utils/plotting.py
"""Deterministic SVG line plots (Agg backend, fixed hash salt, no date metadata)."""

import logging
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams.update(
    {"font.family": "DejaVu Sans", "axes.unicode_minus": False, "svg.hashsalt": "emotion-lab"}
)
import matplotlib.pyplot as plt  # noqa: E402

from .io import ensure_parent  # noqa: E402

logger = logging.getLogger(__name__)


def plot_curve_svg(
    path: str,
    xs: Sequence[float],
    ys: Sequence[float],
    xlabel: str,
    ylabel: str,
    title: str = "",
    log_x: bool = False,
    unit_interval: bool = True,
) -> None:
    ensure_parent(path)
    fig, ax = plt.subplots(figsize=(6, 4), constrained_layout=True)
    ax.plot(list(xs), list(ys), marker="o")
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if unit_interval:
        ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Wrote plot {path}")
