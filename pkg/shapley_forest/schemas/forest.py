import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field

from shapley_forest.core.exceptions import ForestError


def default_subsample_size(n: int) -> int:
    return max(1, int(0.632 * n))


class Resampling(str, Enum):
    BOOTSTRAP = "bootstrap"
    SUBSAMPLE = "subsample"


class ForestParams(BaseModel):
    num_trees: int = Field(500, ge=1)
    mtry: Optional[int] = Field(None, ge=1)
    min_node_size: int = Field(5, ge=1)
    resampling: Resampling = Resampling.BOOTSTRAP
    subsample_size: Optional[int] = Field(None, ge=1)
    max_leaves: Optional[int] = Field(None, ge=1)
    max_depth: Optional[int] = Field(None, ge=0)
    gamma: float = Field(0.0, ge=0.0, lt=0.5)
    delta: float = Field(0.0, ge=0.0, lt=1.0)
    seed: int = Field(0, ge=0, lt=2**64)

    model_config = {"frozen": True}

    @classmethod
    def theory_mode(
        cls,
        n: Optional[int] = None,
        subsample_size: Optional[int] = None,
        gamma: float = 0.05,
        delta: float = 0.05,
        **kwargs,
    ) -> "ForestParams":
        """
        Subsampling without replacement, balanced splits and randomized mtry.

        Without n or subsample_size the size is settled by resolve().
        """
        return cls(
            resampling=Resampling.SUBSAMPLE,
            subsample_size=subsample_size or (default_subsample_size(n) if n else None),
            gamma=gamma,
            delta=delta,
            **kwargs,
        )

    def resolve(self, n: int, p: int) -> "ForestParams":
        """Fill data-dependent defaults and validate against the dataset shape"""
        mtry = self.mtry if self.mtry is not None else max(1, math.ceil(p / 3))
        if mtry > p:
            raise ForestError(f"mtry={mtry} exceeds the number of variables p={p}")
        if n < 2 * self.min_node_size:
            raise ForestError(
                f"n={n} is smaller than 2 * min_node_size={2 * self.min_node_size}"
            )
        if self.resampling == Resampling.SUBSAMPLE:
            size = self.subsample_size if self.subsample_size is not None else default_subsample_size(n)
            if size > n:
                raise ForestError(f"subsample size {size} exceeds n={n}")
            return self.model_copy(update={"mtry": mtry, "subsample_size": size})
        return self.model_copy(update={"mtry": mtry})

    def resample_size(self, n: int) -> int:
        if self.resampling == Resampling.SUBSAMPLE:
            return self.subsample_size if self.subsample_size is not None else default_subsample_size(n)
        return n
