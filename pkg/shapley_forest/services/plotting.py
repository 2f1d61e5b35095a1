import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from shapley_forest.core.config import settings  # noqa: E402
from shapley_forest.core.exceptions import ShapleyForestError  # noqa: E402
from shapley_forest.schemas.run import RunReport  # noqa: E402

logger = logging.getLogger(__name__)


def effects_figure(report: RunReport, ground_truth: Optional[Sequence[float]] = None) -> Figure:
    """
    Box plot of the per-repetition estimates, one box per variable.

    Ground-truth effects, taken from the argument or else from the report
    summary, are drawn as red crosses; none are drawn when neither holds a
    vector.
    """
    effects = report.effects_matrix()
    if effects.ndim != 2 or effects.shape[0] < 1:
        raise ShapleyForestError("cannot plot a report without repetitions")
    truth = ground_truth if ground_truth is not None else report.summary.ground_truth
    p = effects.shape[1]
    positions = np.arange(1, p + 1)

    fig, ax = plt.subplots(figsize=(max(6.0, 0.5 * p + 2.0), 4.5))
    ax.boxplot(effects, positions=positions, widths=0.6)
    if truth is not None:
        ax.scatter(positions, np.asarray(truth, dtype=float), marker="x", color="red", zorder=3, label="theoretical")
        ax.legend(loc="upper right")
    ax.set_xticks(positions)
    ax.set_xticklabels(report.variables, rotation=90 if p > 20 else 0)
    ax.axhline(0.0, color="grey", linewidth=0.5)
    ax.set_ylabel("Shapley effect")
    ax.set_title(f"{len(report.repetitions)} repetitions, K={report.config.num_subsets}")
    fig.tight_layout()
    return fig


def emit_plot(
    report: RunReport,
    path: Union[str, Path],
    ground_truth: Optional[Sequence[float]] = None,
) -> Path:
    """Save effects_figure to path; the suffix picks the format, default settings.plot_format"""
    path = Path(path)
    if not path.suffix:
        path = path.with_suffix(f".{settings.plot_format}")
    fig = effects_figure(report, ground_truth)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format=path.suffix.lstrip("."))
    except OSError as e:
        raise ShapleyForestError(f"could not write plot to {path}: {e}", {"path": str(path)})
    finally:
        plt.close(fig)
    logger.info(f"Plot written to {path}")
    return path
