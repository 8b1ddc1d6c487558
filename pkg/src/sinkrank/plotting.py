"""Optional figures written next to the delimited output."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def ranking_figure(labels: Sequence[str], metric: Sequence[float],
                   performance: Sequence[float], path, kind: str = "cycle") -> None:
    """Bar chart of the metric per profile with ``W(s)`` as markers."""
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(labels) + 1), 3.2))
    ax.bar(x, metric, color="#4c72b0", label=f"{kind} metric")
    ax.plot(x, performance, "o", color="#dd8452", label="W(s)")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("value")
    ax.legend(frameon=False, fontsize=8)
    _finish(fig, path)


def occupancy_figure(labels: Sequence[str], frequency: Sequence[float], path) -> None:
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(labels) + 1), 3.2))
    ax.bar(x, frequency, color="#55a868")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("occupancy")
    ax.set_ylim(0, 1)
    _finish(fig, path)


def stationary_mass_figure(eps_grid: Sequence[float], rcc_mass, path,
                           names: Sequence[str] | None = None) -> None:
    """Stationary mass of each recurrent class against epsilon (log axis)."""
    mass = np.asarray(rcc_mass)
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    for k in range(mass.shape[1]):
        name = names[k] if names else f"sink {k}"
        ax.semilogx(eps_grid, mass[:, k], "o-", label=name)
    ax.invert_xaxis()
    ax.set_xlabel("epsilon")
    ax.set_ylabel("stationary mass")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(frameon=False, fontsize=8)
    _finish(fig, path)
