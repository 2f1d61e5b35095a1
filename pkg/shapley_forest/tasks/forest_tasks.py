import logging
from typing import Any, Dict

import numpy as np

from shapley_forest.models.forest import Tree
from shapley_forest.schemas.forest import ForestParams
from shapley_forest.services.tree_builder import grow_tree

logger = logging.getLogger(__name__)

# Per-process training data, installed once by the pool initializer
_training: Dict[str, Any] = {}


def init_training_data(X: np.ndarray, y: np.ndarray, params: ForestParams) -> None:
    _training.update(X=X, y=y, params=params)


def grow_tree_task(tree_index: int) -> Tree:
    """Grow tree number ``tree_index`` from the installed training data"""
    tree = grow_tree(_training["X"], _training["y"], _training["params"], tree_index)
    logger.debug(f"Tree {tree_index}: {tree.node_count} nodes, depth {tree.max_depth}")
    return tree
