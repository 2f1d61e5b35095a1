from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from shapley_forest.core.exceptions import DatasetError
from shapley_forest.schemas.generator import ColumnKind


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Dataset:
    """Column-typed regression sample; categorical columns hold order ranks"""

    features: np.ndarray
    output: np.ndarray
    columns: List[ColumnKind]
    encoding_maps: Dict[int, Dict[str, int]] = field(default_factory=dict)
    names: Optional[List[str]] = None
    target_name: str = "y"

    def __post_init__(self):
        features = _frozen(self.features)
        output = _frozen(self.output)
        if features.ndim != 2:
            raise DatasetError("features must be a two dimensional matrix")
        n, p = features.shape
        if output.shape != (n,):
            raise DatasetError(f"output has shape {output.shape}, expected ({n},)")
        if len(self.columns) != p:
            raise DatasetError(f"{len(self.columns)} column kinds for {p} feature columns")
        if np.isnan(features).any() or np.isnan(output).any():
            raise DatasetError("dataset contains NaN values after encoding")
        for j, kind in enumerate(self.columns):
            if not kind.is_categorical:
                continue
            mapping = self.encoding_maps.get(j)
            if mapping is None:
                raise DatasetError(f"categorical column {j} has no encoding map")
            ranks = np.fromiter(mapping.values(), dtype=float)
            if not np.isin(features[:, j], ranks).all():
                raise DatasetError(f"column {j} holds values outside its encoding map")
        names = self.names if self.names is not None else [f"X{j + 1}" for j in range(p)]
        if len(names) != p:
            raise DatasetError(f"{len(names)} column names for {p} feature columns")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "output", output)
        object.__setattr__(self, "names", list(names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def output_variance(self) -> float:
        """Population variance of the output (divides by n)"""
        return float(np.var(self.output))

    def select_columns(self, indices: List[int]) -> "Dataset":
        """Sub-dataset restricted to the given feature columns, in the given order"""
        indices = list(indices)
        return Dataset(
            features=self.features[:, indices],
            output=self.output,
            columns=[self.columns[j] for j in indices],
            encoding_maps={
                k: self.encoding_maps[j]
                for k, j in enumerate(indices)
                if j in self.encoding_maps
            },
            names=[self.names[j] for j in indices],
            target_name=self.target_name,
        )
