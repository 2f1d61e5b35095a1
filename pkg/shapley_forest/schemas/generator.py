from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


class ColumnType(str, Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


class Experiment(str, Enum):
    EXP1A = "exp1a"
    EXP1B = "exp1b"
    EXP2 = "exp2"
    EXP3 = "exp3"
    CUSTOM = "custom"


class ColumnKind(BaseModel):
    kind: ColumnType = ColumnType.CONTINUOUS
    categories: Optional[List[str]] = None

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def check_categories(self):
        if self.kind == ColumnType.CATEGORICAL:
            if not self.categories:
                raise ValueError("categorical column needs a non-empty category list")
            if len(set(self.categories)) != len(self.categories):
                raise ValueError("categorical column has duplicate categories")
        elif self.categories is not None:
            raise ValueError("continuous column cannot carry categories")
        return self

    @property
    def is_categorical(self) -> bool:
        return self.kind == ColumnType.CATEGORICAL

    @classmethod
    def continuous(cls) -> "ColumnKind":
        return cls(kind=ColumnType.CONTINUOUS)

    @classmethod
    def categorical(cls, labels: List[str]) -> "ColumnKind":
        return cls(kind=ColumnType.CATEGORICAL, categories=list(labels))


def parse_schema(text: str) -> List[ColumnKind]:
    """
    Parse a compact schema string.

    Columns are comma separated: ``c`` for continuous and ``cat:a|b|c``
    for a categorical column with labels a, b and c.
    """
    columns = []
    for token in text.split(","):
        token = token.strip()
        if token in ("c", "continuous"):
            columns.append(ColumnKind.continuous())
        elif token.startswith("cat:"):
            columns.append(ColumnKind.categorical(token[4:].split("|")))
        else:
            raise ValueError(f"Unknown column kind '{token}'")
    return columns


class GeneratorParams(BaseModel):
    noise_fraction: float = Field(0.05, ge=0.0, lt=1.0)

    # Linear-Gaussian family (exp1a, exp1b, custom)
    beta: Optional[List[float]] = None
    covariance: Optional[List[List[float]]] = None
    correlation_decay: float = Field(0.5, gt=-1.0, lt=1.0)
    duplicate_source: int = Field(1, ge=0)
    duplicate_count: int = Field(2, ge=0)
    dummy_count: int = Field(2, ge=0)
    extra_noise_count: int = Field(85, ge=0)

    # Interaction blocks (exp2)
    a: float = 3.0
    b: float = 1.0
    c: float = 3.0
    d: float = 1.0
    alpha: float = Field(3.0, ge=0.0)
    block_beta: float = Field(1.0, ge=0.0)
    rho1: float = Field(0.9, gt=-1.0, lt=1.0)
    rho2: float = Field(0.5, gt=-1.0, lt=1.0)
    exp2_dummy_count: int = Field(5, ge=0)

    # Categorical design (exp3)
    category_levels: List[int] = Field(default_factory=lambda: [3, 3, 10, 100])

    @field_validator("category_levels")
    @classmethod
    def check_levels(cls, levels: List[int]) -> List[int]:
        if len(levels) < 1 or any(level < 2 for level in levels):
            raise ValueError("every categorical input needs at least 2 levels")
        return levels

    @model_validator(mode="after")
    def check_covariance(self):
        if self.covariance is None:
            return self
        sigma = np.asarray(self.covariance, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError("covariance must be a square matrix")
        if not np.allclose(sigma, sigma.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise ValueError("covariance must be positive definite")
        if self.beta is not None and len(self.beta) != sigma.shape[0]:
            raise ValueError("beta and covariance dimensions differ")
        return self

    def default_beta(self) -> np.ndarray:
        """Descending coefficients 1.0, 0.9, ..., 0.0 for the 11 base inputs"""
        if self.beta is not None:
            return np.asarray(self.beta, dtype=float)
        return np.round(np.linspace(1.0, 0.0, 11), 10)

    def default_covariance(self, p: int) -> np.ndarray:
        """Toeplitz correlation decay ** |i - j| unless an explicit matrix is given"""
        if self.covariance is not None:
            return np.asarray(self.covariance, dtype=float)
        idx = np.arange(p)
        return self.correlation_decay ** np.abs(idx[:, None] - idx[None, :])


class GeneratorSpec(BaseModel):
    experiment: Experiment
    n: int = Field(..., ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    params: GeneratorParams = Field(default_factory=GeneratorParams)

    @model_validator(mode="after")
    def check_custom(self):
        if self.experiment == Experiment.CUSTOM:
            if self.params.beta is None:
                raise ValueError("custom experiment needs an explicit beta vector")
        return self

    def with_seed(self, seed: int) -> "GeneratorSpec":
        return self.model_copy(update={"seed": seed})
