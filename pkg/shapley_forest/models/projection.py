from dataclasses import dataclass

import numpy as np

from shapley_forest.core.exceptions import EstimationError
from shapley_forest.models.subsets import VarSubset


@dataclass(frozen=True)
class ProjectionQuery:
    """Query point given only on the variables of ``subset``, in index order"""

    subset: VarSubset
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.subset.is_empty:
            raise EstimationError("projection subset must not be empty")
        if len(values) != self.subset.size:
            raise EstimationError(
                f"query gives {len(values)} values for a subset of {self.subset.size} variables"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_point(cls, subset: VarSubset, x: np.ndarray) -> "ProjectionQuery":
        return cls(subset, np.asarray(x, dtype=float)[list(subset.indices)])

    def full_point(self) -> np.ndarray:
        """Length-p vector with NaN outside the subset"""
        x = np.full(self.subset.p, np.nan)
        x[list(self.subset.indices)] = self.values
        return x


@dataclass(frozen=True)
class ProjectedPrediction:
    value: float
    support: int
    stop_level: int
