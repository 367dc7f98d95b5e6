"""Report tables and SVG plots."""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from rich.console import Console  # noqa: E402
from rich.table import Table  # noqa: E402

from racing.models import EstimateSnapshot, MetricsTable, RunResult  # noqa: E402
from racing.tracks import TrackGeometry  # noqa: E402


logger = logging.getLogger(__name__)

CM = 100.0
PLOT_SPACING = 0.01
REPORT_HEADER = [
    "label", "track", "runs",
    "hausdorff_mean", "hausdorff_std", "kappa_mae_mean", "kappa_mae_std",
    "mean_abs_eta_mean", "mean_abs_eta_std", "max_eta_mean", "max_eta_std",
    "success_rate", "worst_hausdorff", "overall_max_eta", "solver_failures",
]


def report_rows(tables: Sequence[MetricsTable]) -> List[List[object]]:
    """Flat CSV rows of aggregated tables, in REPORT_HEADER order."""
    return [[
        t.label, t.track, t.runs,
        t.hausdorff.mean, t.hausdorff.std, t.kappa_mae.mean, t.kappa_mae.std,
        t.mean_abs_eta.mean, t.mean_abs_eta.std, t.max_eta.mean, t.max_eta.std,
        t.success_rate, t.worst_hausdorff, t.overall_max_eta, t.solver_failures,
    ] for t in tables]


class ReportView:
    """Renders aggregated suite tables to the terminal."""
    console = Console()

    @staticmethod
    def ablation_table(tables: Sequence[MetricsTable]) -> Table:
        """Estimator comparison: one row per method, one column group per track."""
        tracks: List[str] = list(dict.fromkeys(t.track for t in tables))
        cells: Dict[str, Dict[str, MetricsTable]] = {}
        for t in tables:
            cells.setdefault(t.label, {})[t.track] = t

        table = Table(title="Estimation ablation", show_lines=False)
        table.add_column("Method", style="bold cyan")
        for track in tracks:
            table.add_column(f"{track}\nHD [cm]", justify="right")
            table.add_column(f"{track}\nκ MAE [1/m]", justify="right")
            table.add_column(f"{track}\nSR [%]", justify="right")
        table.add_column("Worst HD [cm]", justify="right", style="yellow")

        for label, row in cells.items():
            values = [label]
            worst = []
            for track in tracks:
                cell = row.get(track)
                if cell is None:
                    values.extend(["-", "-", "-"])
                    continue
                values.append(cell.hausdorff.format(CM, 2))
                values.append(cell.kappa_mae.format(1.0, 3))
                values.append(f"{cell.success_rate:.0f}")
                if np.isfinite(cell.worst_hausdorff):
                    worst.append(cell.worst_hausdorff)
            values.append(f"{max(worst) * CM:.2f}" if worst else "-")
            table.add_row(*values)
        return table

    @staticmethod
    def sweep_table(tables: Sequence[MetricsTable]) -> Table:
        """Scenario-count comparison of the uncertainty-aware controller."""
        table = Table(title="Uncertainty-aware control")
        table.add_column("Scenarios", style="bold cyan")
        table.add_column("Track")
        table.add_column("avg η [cm]", justify="right")
        table.add_column("avg max η [cm]", justify="right")
        table.add_column("max η [cm]", justify="right", style="yellow")
        table.add_column("avg HD [cm]", justify="right")
        table.add_column("Runs", justify="right")
        for t in tables:
            table.add_row(
                t.label, t.track, t.mean_abs_eta.format(CM, 2), t.max_eta.format(CM, 2),
                f"{t.overall_max_eta * CM:.2f}", t.hausdorff.format(CM, 2), str(t.runs),
            )
        return table

    @classmethod
    def show(cls, table: Table) -> None:
        cls.console.print(table)


def _save(figure: "plt.Figure", path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(path, format="svg", bbox_inches="tight")
    plt.close(figure)
    logger.debug(f"Saved plot {path}")
    return path


def _track_outline(geometry: TrackGeometry) -> np.ndarray:
    s = np.linspace(0.0, geometry.length, int(geometry.length / PLOT_SPACING) + 1)
    return geometry.poses_at(s)


def plot_run(result: RunResult, geometry: TrackGeometry, path: Union[str, Path],
             every: int = 10) -> Path:
    """Track with its boundaries, the driven trajectory and every `every`-th estimate."""
    poses = _track_outline(geometry)
    half = 0.5 * geometry.track.width
    normal = np.column_stack((-np.sin(poses[:, 0]), np.cos(poses[:, 0])))
    center = poses[:, 1:]

    figure, ax = plt.subplots(figsize=(7, 7))
    ax.plot(center[:, 0], center[:, 1], color="0.6", linestyle="--", linewidth=0.8, label="centerline")
    for side in (-1.0, 1.0):
        edge = center + side * half * normal
        ax.plot(edge[:, 0], edge[:, 1], color="black", linewidth=1.0)
    for estimate in result.estimates[::max(every, 1)]:
        ax.plot(estimate.points[:, 0], estimate.points[:, 1], color="tab:orange", alpha=0.5, linewidth=0.8)
    if result.log:
        xy = np.array([(r.x_c, r.y_c) for r in result.log])
        ax.plot(xy[:, 0], xy[:, 1], color="tab:blue", linewidth=1.5, label="trajectory")
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"{result.track} | {result.mode.value} | seed {result.seed}")
    ax.legend(loc="upper right")
    return _save(figure, path)


def plot_curvature(estimates: Sequence[EstimateSnapshot], geometry: TrackGeometry,
                   path: Union[str, Path], latest: Optional[int] = None) -> Path:
    """Estimated curvature against true curvature over the track arc length."""
    s = np.linspace(0.0, geometry.length, int(geometry.length / PLOT_SPACING) + 1)
    figure, ax = plt.subplots(figsize=(9, 4))
    ax.plot(s, geometry.curvature(s), color="black", linewidth=1.5, label="ground truth")
    chosen = list(estimates) if latest is None else list(estimates)[-latest:]
    for estimate in chosen:
        if len(estimate.points) < 2:
            continue
        arc = np.array([geometry.locate(x, y).s for x, y in estimate.points])
        kappa = np.array(estimate.kappa, dtype=float)
        kappa[1:][np.diff(arc) < 0.0] = np.nan  # lap seam
        ax.plot(arc, kappa, color="tab:orange", alpha=0.3, linewidth=0.8)
    ax.set_xlabel("arc length [m]")
    ax.set_ylabel("curvature [1/m]")
    ax.set_xlim(0.0, geometry.length)
    ax.legend(loc="upper right")
    return _save(figure, path)
