"""Static SVG plots: vertex traces and triangle heatmaps of the embedding."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402

from ..geometry import ApproxGraph, FractalKind  # noqa: E402


def _save(fig, path: Path, deterministic: bool) -> None:
    metadata = {"Date": None} if deterministic else None
    if deterministic:
        plt.rcParams["svg.hashsalt"] = "fractalwave"
    fig.savefig(path, format="svg", metadata=metadata)
    plt.close(fig)


def plot_traces(
    times: np.ndarray,
    traces: dict[str, np.ndarray],
    path: str | Path,
    title: str = "",
    deterministic: bool = True,
) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, y in traces.items():
        ax.plot(times, y, label=label, linewidth=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("u")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    _save(fig, Path(path), deterministic)


def plot_field(
    g: ApproxGraph,
    values: np.ndarray,
    path: str | Path,
    title: str = "",
    deterministic: bool = True,
) -> None:
    """Snapshot of a field: line plot on the interval, tripcolor on the gasket."""
    fig, ax = plt.subplots(figsize=(6, 5))
    if g.spec.kind is FractalKind.INTERVAL:
        order = np.argsort(g.coords[:, 0])
        ax.plot(g.coords[order, 0], values[order], "-o", markersize=2)
        ax.set_xlabel("x")
        ax.set_ylabel("u")
    else:
        triangles = np.array([cell for _, cell in g.cells])
        tri = mtri.Triangulation(g.coords[:, 0], g.coords[:, 1], triangles)
        tpc = ax.tripcolor(tri, values, shading="gouraud", cmap="viridis")
        fig.colorbar(tpc, ax=ax)
        ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    _save(fig, Path(path), deterministic)
