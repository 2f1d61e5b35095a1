import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from shapley_forest.models.subsets import SubsetTable, VarSubset
from shapley_forest.schemas.run import AblationReport, KSweepReport, RunReport
from shapley_forest.services.value_estimators import ValueEstimate

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _ensure_dir(out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(document: BaseModel, path: Path) -> Path:
    path.write_text(document.model_dump_json(indent=2), encoding="utf-8")
    return path


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_report(report: RunReport, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """report.json, the flat shapley.csv and repetitions.csv views, and the subset and value dumps"""
    out = _ensure_dir(out_dir)
    summary = report.summary
    truth = summary.ground_truth if summary.ground_truth is not None else [np.nan] * len(report.variables)
    shapley = pd.DataFrame(
        {"variable": report.variables, "mean": summary.mean, "std": summary.std, "truth": truth}
    )
    repetitions = pd.DataFrame(
        [
            {"rep": rep.rep, "variable": name, "effect": effect}
            for rep in report.repetitions
            for name, effect in zip(report.variables, rep.effects)
        ]
    )
    paths = {
        "report": _write_json(report, out / "report.json"),
        "shapley": _write_frame(shapley, out / "shapley.csv"),
        "repetitions": _write_frame(repetitions, out / "repetitions.csv"),
    }
    if report.subset_tables:
        paths["subsets"] = write_subset_table(report.subset_tables, out / "subsets.csv")
    if report.value_estimates:
        paths["values"] = write_value_estimates(report.value_estimates, out / "values.csv")
    logger.info(f"Report written to {out}")
    return paths


def write_subset_table(tables: Dict[int, SubsetTable], path: Union[str, Path]) -> Path:
    """One (rep, subset, count, frequency) row per path subset of each repetition"""
    frame = pd.DataFrame(
        [
            {"rep": rep, "subset": subset.key(), "count": table.counts[subset], "frequency": frequency}
            for rep, table in tables.items()
            for subset, frequency in zip(table.subsets(), table.frequencies())
        ],
        columns=["rep", "subset", "count", "frequency"],
    )
    return _write_frame(frame, Path(path))


def write_value_estimates(values: Dict[int, Dict[VarSubset, ValueEstimate]], path: Union[str, Path]) -> Path:
    """One (rep, subset, value, covered) row per estimated subset of each repetition"""
    frame = pd.DataFrame(
        [
            {"rep": rep, "subset": subset.key(), "value": estimate.value, "covered": estimate.covered}
            for rep, estimates in values.items()
            for subset, estimate in estimates.items()
        ],
        columns=["rep", "subset", "value", "covered"],
    )
    return _write_frame(frame, Path(path))


def write_effects(effects: Sequence[float], path: Union[str, Path], names: Optional[List[str]] = None) -> Path:
    """One (variable, effect) row per input; used for estimates and ground truth alike"""
    effects = np.asarray(effects, dtype=float)
    names = names or [f"X{j + 1}" for j in range(len(effects))]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return _write_frame(pd.DataFrame({"variable": names, "effect": effects}), path)


def write_ablation(report: AblationReport, out_dir: Union[str, Path]) -> Dict[str, Path]:
    out = _ensure_dir(out_dir)
    frame = pd.DataFrame(
        [
            {"sampler": cell.sampler.value, "estimator": cell.strategy.value, "cumulative_error": cell.cumulative_error}
            for cell in report.cells
        ]
    )
    paths = {
        "json": _write_json(report, out / "ablation.json"),
        "csv": _write_frame(frame, out / "ablation.csv"),
    }
    logger.info(f"Ablation table written to {out}")
    return paths


def write_ksweep(report: KSweepReport, out_dir: Union[str, Path]) -> Dict[str, Path]:
    out = _ensure_dir(out_dir)
    frame = pd.DataFrame(
        [{"K": row.num_subsets, "mean_error": row.mean_error, "std_error": row.std_error} for row in report.rows]
    )
    paths = {
        "json": _write_json(report, out / "ksweep.json"),
        "csv": _write_frame(frame, out / "ksweep.csv"),
    }
    logger.info(f"K sweep table written to {out}")
    return paths
