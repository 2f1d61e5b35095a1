import logging
from typing import Any, Dict

import numpy as np

from shapley_forest.models.forest import Forest
from shapley_forest.models.subsets import VarSubset
from shapley_forest.services.cell_refinement import project_subset

logger = logging.getLogger(__name__)

_projection: Dict[str, Any] = {}


def init_projection_data(forest: Forest, X: np.ndarray, y: np.ndarray) -> None:
    _projection.update(forest=forest, X=X, y=y)


def project_subset_task(subset: VarSubset) -> np.ndarray:
    """OOB projected predictions of the installed forest for one subset"""
    predictions = project_subset(_projection["forest"], _projection["X"], _projection["y"], subset)
    logger.debug(f"Projected subset {{{subset.key()}}}")
    return predictions
