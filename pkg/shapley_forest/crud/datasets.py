import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from shapley_forest.core.exceptions import DatasetError
from shapley_forest.models.dataset import Dataset
from shapley_forest.schemas.generator import GeneratorSpec

logger = logging.getLogger(__name__)


def read_frame(path: str) -> pd.DataFrame:
    """Read a CSV file with every cell kept as text"""
    file_path = Path(path)
    if not file_path.is_file():
        raise DatasetError(f"data file not found: {path}", {"path": str(path)})
    try:
        frame = pd.read_csv(
            file_path,
            sep=",",
            decimal=".",
            header=0,
            dtype=str,
            keep_default_na=False,
            encoding="utf-8",
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DatasetError(f"could not parse {path}: {e}", {"path": str(path)})
    logger.debug(f"Read {len(frame)} rows x {frame.shape[1]} columns from {path}")
    return frame


def _labels(dataset: Dataset, j: int) -> np.ndarray:
    inverse = {rank: label for label, rank in dataset.encoding_maps[j].items()}
    return np.array([inverse[int(v)] for v in dataset.features[:, j]], dtype=object)


def write_csv(dataset: Dataset, path: str, names: Optional[List[str]] = None) -> Path:
    """
    Write features then the target column.

    Categorical columns are written as labels, continuous ones with repr
    precision, so reading the file back reproduces the dataset exactly.
    """
    names = names or dataset.names
    columns = {}
    for j, name in enumerate(names):
        if dataset.columns[j].is_categorical:
            columns[name] = _labels(dataset, j)
        else:
            columns[name] = [repr(float(v)) for v in dataset.features[:, j]]
    columns[dataset.target_name] = [repr(float(v)) for v in dataset.output]
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(columns).to_csv(file_path, index=False, encoding="utf-8")
    logger.info(f"Wrote dataset n={dataset.n} p={dataset.p} to {file_path}")
    return file_path


def write_generator_spec(spec: GeneratorSpec, path: str) -> Path:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_path.write_text(spec.model_dump_json(indent=2), encoding="utf-8")
    return file_path


def read_generator_spec(path: str) -> GeneratorSpec:
    file_path = Path(path)
    if not file_path.is_file():
        raise DatasetError(f"generator spec not found: {path}")
    return GeneratorSpec.model_validate_json(file_path.read_text(encoding="utf-8"))
