"""SVG renderings of trajectories, policy-space phase plots and curves."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple
import io
import logging
import math

import numpy as np
from matplotlib import rcParams
from matplotlib.axes import Axes
from matplotlib.collections import LineCollection
from matplotlib.colors import ListedColormap
from matplotlib.figure import Figure

from .gaussian_nav import ComplexityCurves, GaussianPolicy, NavTask, \
    PolicyGrid, Trajectories, OUTSIDE


logger = logging.getLogger(__name__)

DEFAULT_COLOR = "#3a9e9e"
OUTSIDE_COLOR = "#9a9a9a"
PALETTE = ("#d1495b", "#2e86ab", "#edae49", "#66a182", "#8d6a9f",
           "#00798c", "#f18f01")

rcParams["svg.hashsalt"] = "telicstates"


def state_colors(labels: Sequence[str]) -> Dict[str, str]:
    """Default state first, then one palette colour per region state."""

    colors = {labels[0]: DEFAULT_COLOR}
    for i, label in enumerate(labels[1:]):
        colors[label] = PALETTE[i % len(PALETTE)]
    return colors


def _to_svg(figure: Figure) -> str:
    buffer = io.StringIO()
    figure.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def render_trajectory_tiles(
        tiles: Sequence[Tuple[GaussianPolicy, Trajectories]],
        task: NavTask, columns: int = 3) -> str:
    columns = max(1, min(columns, len(tiles)))
    rows = math.ceil(len(tiles) / columns)
    colors = state_colors(task.labels)
    colors[OUTSIDE] = OUTSIDE_COLOR

    figure = Figure(figsize=(3.2 * columns, 2.4 * rows))
    axes = figure.subplots(rows, columns, squeeze=False).ravel()
    steps = np.arange(task.horizon + 1)

    for ax, (policy, walks) in zip(axes, tiles):
        for region in task.regions:
            ax.axhspan(region.lo, region.hi, color=colors[region.label],
                       alpha=0.15, linewidth=0)
        segments = [np.column_stack([steps, row]) for row in walks.positions]
        ax.add_collection(LineCollection(
            segments, colors=[colors[label] for label in walks.labels],
            linewidths=0.4, alpha=0.5))
        ax.set_xlim(0, task.horizon)
        ax.autoscale(axis="y")
        ax.set_title(f"mu={policy.mu:g}, sigma={policy.sigma:g}",
                     fontsize=8)
        ax.tick_params(labelsize=6)

    for ax in axes[len(tiles):]:
        ax.set_axis_off()

    figure.tight_layout()
    return _to_svg(figure)


@dataclass(frozen=True)
class PhasePanel:
    title: str
    grid: PolicyGrid
    markers: Dict[str, GaussianPolicy] = field(default_factory=dict)


def _draw_phase(ax: Axes, panel: PhasePanel) -> None:
    grid = panel.grid
    colors = state_colors(grid.labels)
    cmap = ListedColormap([colors[label] for label in grid.labels])

    ax.pcolormesh(grid.mu, grid.sigma, grid.states, cmap=cmap,
                  vmin=-0.5, vmax=len(grid.labels) - 0.5, shading="nearest")
    for lines in grid.contours.values():
        for line in lines:
            xs, ys = zip(*line)
            ax.plot(xs, ys, color="black", linewidth=0.8)
    for i, (name, policy) in enumerate(sorted(panel.markers.items())):
        ax.plot([policy.mu], [policy.sigma], marker="o",
                markersize=5, markeredgecolor="white",
                color=PALETTE[-1 - i % len(PALETTE)], label=name)

    ax.set_title(panel.title, fontsize=9)
    ax.set_xlabel("mu")
    ax.set_ylabel("sigma")
    if panel.markers:
        ax.legend(fontsize=6, loc="upper right")


def render_phase_panels(panels: Sequence[PhasePanel]) -> str:
    columns = min(2, len(panels))
    rows = math.ceil(len(panels) / columns)
    figure = Figure(figsize=(4.2 * columns, 3.4 * rows))
    axes = figure.subplots(rows, columns, squeeze=False).ravel()
    for ax, panel in zip(axes, panels):
        _draw_phase(ax, panel)
    for ax in axes[len(panels):]:
        ax.set_axis_off()
    figure.tight_layout()
    return _to_svg(figure)


def render_curves(curves: ComplexityCurves, xlabel: str, ylabel: str,
                  title: str = "",
                  vertical: Optional[float] = None,
                  horizontal: Optional[float] = None) -> str:
    """Line per state; dashed grey guides mark the configured values."""

    colors = state_colors(list(curves.values))
    figure = Figure(figsize=(4.8, 3.6))
    ax = figure.subplots()

    for label, values in curves.values.items():
        points: List[Tuple[float, float]] = [
            (x, v) for x, v in zip(curves.x, values) if v is not None]
        if not points:
            continue
        xs, ys = zip(*points)
        ax.plot(xs, ys, marker=".", color=colors[label], label=label)

    if vertical is not None:
        ax.axvline(vertical, color="grey", linestyle="--", linewidth=0.8)
    if horizontal is not None:
        ax.axhline(horizontal, color="grey", linestyle="--", linewidth=0.8)

    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7)
    figure.tight_layout()
    return _to_svg(figure)
