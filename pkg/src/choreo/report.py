"""Figure rendering for compiled trajectories and pose-library coverage.

Figures land next to the JSON artifacts they describe, so a compile can be
eyeballed without a running session.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .platform import CoverageReport, PlatformSpec, fk_full
from .score import Reach, enumerate_directions
from .synth import CompiledScore


def _bare(path) -> Path:
    path = Path(path)
    while path.suffix:
        path = path.with_suffix("")
    return path


def save_trajectory_figures(
    compiled: CompiledScore, spec: PlatformSpec, out_base
) -> list[Path]:
    """Write `<base>.joints.png` and `<base>.path.png`."""
    base = _bare(out_base)
    traj = compiled.trajectory
    t = traj.frames_t

    fig, ax = plt.subplots(figsize=(8, 4))
    for j, link in enumerate(spec.links):
        ax.plot(t, traj.frames_q[:, j], label=link.name)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("joint angle [rad]")
    ax.set_title(f"{spec.name}: joint trajectories")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    joints_path = base.with_suffix(".joints.png")
    fig.savefig(joints_path, dpi=110, bbox_inches="tight")
    plt.close(fig)

    step = max(1, len(t) // 2000)
    pts = np.array(
        [fk_full(spec, q).endpoints[-1] for q in traj.frames_q[::step]]
    )
    fig, axes = plt.subplots(1, 2, figsize=(9, 4.2))
    for ax, (i, j, name) in zip(axes, [(0, 1, "top (x-y)"), (0, 2, "side (x-z)")]):
        ax.plot(pts[:, i], pts[:, j], lw=0.9)
        ax.scatter(pts[:1, i], pts[:1, j], color="green", zorder=3, label="start")
        ax.scatter(pts[-1:, i], pts[-1:, j], color="red", zorder=3, label="end")
        ax.set_title(name)
        ax.set_aspect("equal")
        ax.grid(True, alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.suptitle(f"{spec.name}: endpoint path")
    path_path = base.with_suffix(".path.png")
    fig.savefig(path_path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return [joints_path, path_path]


def save_coverage_figure(report: CoverageReport, spec: PlatformSpec, out_base) -> Path:
    """Write `<base>.coverage.png`: one row per (label, reach), one column
    per direction; green = pose installed."""
    base = _bare(out_base)
    directions = enumerate_directions()
    reaches = list(Reach)
    labels = sorted(spec.labels)
    missing = {key for key, _ in report.missing}

    grid = np.zeros((len(labels) * len(reaches), len(directions)))
    row_names = []
    for li, label in enumerate(labels):
        for ri, reach in enumerate(reaches):
            row_names.append(f"{label} / {reach.value}")
            for ci, d in enumerate(directions):
                grid[li * len(reaches) + ri, ci] = (
                    0.0 if (label, d, reach) in missing else 1.0
                )

    fig, ax = plt.subplots(figsize=(11, 0.45 * len(row_names) + 1.6))
    ax.imshow(grid, cmap="RdYlGn", vmin=0, vmax=1, aspect="auto")
    ax.set_yticks(range(len(row_names)))
    ax.set_yticklabels(row_names, fontsize=8)
    ax.set_xticks(range(len(directions)))
    ax.set_xticklabels([d.name for d in directions], rotation=90, fontsize=7)
    ax.set_title(
        f"{report.platform}: {report.solved}/{report.requested} poses installed"
    )
    out = base.with_suffix(".coverage.png")
    fig.savefig(out, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return out
