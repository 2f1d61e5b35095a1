from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np

from shapley_forest.core.exceptions import SolverError

EFFICIENCY_TOLERANCE = 1e-8


@dataclass(frozen=True)
class KernelWeight:
    p: int
    u_size: int
    value: float


@dataclass(frozen=True)
class RegressionSystem:
    """Importance-weighted rows I(U), v(U), w(U)/p_hat(U) plus the sum constraint"""

    indicators: np.ndarray
    responses: np.ndarray
    weights: np.ndarray
    constraint: float
    K: int
    p: int
    unselected: Tuple[int, ...] = ()

    def __post_init__(self):
        indicators = np.asarray(self.indicators, dtype=float)
        responses = np.asarray(self.responses, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        rows = len(responses)
        if indicators.shape != (rows, self.p) or weights.shape != (rows,):
            raise SolverError(
                "regression rows are misaligned",
                {"indicators": list(indicators.shape), "responses": rows, "weights": len(weights)},
            )
        if not (np.isfinite(weights).all() and (weights > 0).all()):
            raise SolverError("row weights must be finite and positive")
        ones = indicators.sum(axis=1)
        if rows and (ones.min() < 1 or ones.max() > self.p - 1):
            raise SolverError("indicator rows must hold between 1 and p-1 ones")
        for name, array in (("indicators", indicators), ("responses", responses), ("weights", weights)):
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def rows(self) -> int:
        return len(self.responses)


@dataclass(frozen=True)
class ShapleyEstimate:
    effects: np.ndarray
    constraint: float
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        effects = np.asarray(self.effects, dtype=float)
        if not np.isfinite(effects).all():
            raise SolverError("solver produced non-finite effects")
        gap = abs(float(effects.sum()) - self.constraint)
        if gap > EFFICIENCY_TOLERANCE:
            raise SolverError(
                "effects do not sum to the explained variance",
                {"sum": float(effects.sum()), "constraint": self.constraint},
            )
        effects.setflags(write=False)
        object.__setattr__(self, "effects", effects)

    @property
    def p(self) -> int:
        return len(self.effects)
