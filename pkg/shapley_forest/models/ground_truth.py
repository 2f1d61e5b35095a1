from dataclasses import dataclass
from typing import Optional

import numpy as np

from shapley_forest.core.exceptions import GroundTruthError


@dataclass(frozen=True)
class DuplicationSpec:
    """``copies`` exact copies of base variable ``source`` inserted at position ``insert_at``"""

    source: int
    copies: int
    insert_at: int


@dataclass(frozen=True)
class LinearGaussianModel:
    """Y = beta^T X + eps with X ~ N(0, sigma) and independent noise of variance noise_var"""

    beta: np.ndarray
    sigma: np.ndarray
    noise_var: float = 0.0
    duplication: Optional[DuplicationSpec] = None

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        p = len(beta)
        if sigma.shape != (p, p):
            raise GroundTruthError(f"covariance shape {sigma.shape} does not match p={p}")
        if not np.allclose(sigma, sigma.T, atol=1e-12):
            raise GroundTruthError("covariance must be symmetric")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise GroundTruthError("covariance must be positive definite")
        if self.noise_var < 0:
            raise GroundTruthError(f"noise variance must be >= 0, got {self.noise_var}")
        dup = self.duplication
        if dup is not None and not (0 <= dup.source < p and dup.copies >= 0 and 0 <= dup.insert_at <= p):
            raise GroundTruthError("duplication spec does not fit the base model", {"p": p})
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma", sigma)

    @property
    def base_p(self) -> int:
        return len(self.beta)

    @property
    def p(self) -> int:
        """Number of inputs seen by a learner, copies included"""
        return self.base_p + (self.duplication.copies if self.duplication else 0)

    @property
    def signal_variance(self) -> float:
        return float(self.beta @ self.sigma @ self.beta)

    @property
    def output_variance(self) -> float:
        return self.signal_variance + self.noise_var

    @property
    def explained_fraction(self) -> float:
        return self.signal_variance / self.output_variance

    def base_index(self, j: int) -> int:
        """Map an input position (copies included) to its base variable"""
        dup = self.duplication
        if dup is None or j < dup.insert_at:
            return j
        if j < dup.insert_at + dup.copies:
            return dup.source
        return j - dup.copies


@dataclass(frozen=True)
class Exp2Model:
    """
    Two independent blocks of five interacting Gaussian inputs plus dummies.

    Y = sqrt(alpha) (a X1 X2 1{X3 > 0} + b X4 X5 1{X3 < 0})
      + sqrt(beta)  (c X6 X7 1{X8 > 0} + d X9 X10 1{X8 < 0}) + eps
    """

    a: float = 3.0
    b: float = 1.0
    c: float = 3.0
    d: float = 1.0
    alpha: float = 3.0
    beta: float = 1.0
    rho1: float = 0.9
    rho2: float = 0.5
    noise_var: float = 0.0
    dummy_count: int = 5

    def __post_init__(self):
        if not (abs(self.rho1) < 1 and abs(self.rho2) < 1):
            raise GroundTruthError("block correlations must lie in (-1, 1)")
        if self.alpha < 0 or self.beta < 0 or self.noise_var < 0:
            raise GroundTruthError("block scales and noise variance must be non-negative")

    @staticmethod
    def _block_variance(a: float, b: float, rho1: float, rho2: float) -> float:
        return (
            (a * rho1 - b * rho2) ** 2 / 4
            + (a * rho1) ** 2 / 2
            + (b * rho2) ** 2 / 2
            + a**2 / 2
            + b**2 / 2
        )

    @property
    def V1(self) -> float:
        return self._block_variance(self.a, self.b, self.rho1, self.rho2)

    @property
    def V2(self) -> float:
        return self._block_variance(self.c, self.d, self.rho1, self.rho2)

    @property
    def signal_variance(self) -> float:
        return self.alpha * self.V1 + self.beta * self.V2

    @property
    def output_variance(self) -> float:
        return self.signal_variance + self.noise_var

    @property
    def p(self) -> int:
        return 10 + self.dummy_count

    def covariance(self) -> np.ndarray:
        sigma = np.eye(self.p)
        for i, j, rho in ((0, 1, self.rho1), (5, 6, self.rho1), (3, 4, self.rho2), (8, 9, self.rho2)):
            sigma[i, j] = sigma[j, i] = rho
        return sigma
