import json
import logging
from pathlib import Path

from pydantic import ValidationError

from shapley_forest.core.exceptions import ForestError
from shapley_forest.models.forest import Forest, Tree
from shapley_forest.schemas.forest import ForestParams

logger = logging.getLogger(__name__)

FOREST_FORMAT = "shapley-forest/forest"
FOREST_FORMAT_VERSION = 1

TREE_FIELDS = ("feature", "threshold", "left", "right", "value", "n_node", "depth", "inbag")


def forest_to_dict(forest: Forest) -> dict:
    return {
        "format": FOREST_FORMAT,
        "version": FOREST_FORMAT_VERSION,
        "params": forest.params.model_dump(mode="json"),
        "p": forest.p,
        "n": forest.n,
        "trees": [{name: getattr(tree, name).tolist() for name in TREE_FIELDS} for tree in forest.trees],
    }


def forest_from_dict(document: dict) -> Forest:
    if document.get("format") != FOREST_FORMAT:
        raise ForestError(f"not a forest document: format {document.get('format')!r}")
    if document.get("version") != FOREST_FORMAT_VERSION:
        raise ForestError(f"unsupported forest format version {document.get('version')!r}")
    try:
        params = ForestParams.model_validate(document["params"])
        trees = [Tree(**{name: raw[name] for name in TREE_FIELDS}) for raw in document["trees"]]
        forest = Forest(trees=tuple(trees), params=params, n=int(document["n"]), p=int(document["p"]))
    except (KeyError, TypeError, ValueError, ValidationError) as e:
        raise ForestError(f"malformed forest document: {e}")
    for t, tree in enumerate(forest.trees):
        if tree.inbag.size and (tree.inbag.min() < 0 or tree.inbag.max() >= forest.n):
            raise ForestError(f"tree {t} references rows outside 0..{forest.n - 1}")
        if (tree.feature >= forest.p).any():
            raise ForestError(f"tree {t} splits on a variable outside 1..{forest.p}")
    return forest


def save_forest(forest: Forest, path: str) -> Path:
    """Write the forest as one JSON document; floats keep full precision"""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_path.write_text(json.dumps(forest_to_dict(forest)), encoding="utf-8")
    logger.info(f"Saved forest with {forest.num_trees} trees to {file_path}")
    return file_path


def load_forest(path: str) -> Forest:
    file_path = Path(path)
    if not file_path.is_file():
        raise ForestError(f"forest file not found: {path}", {"path": str(path)})
    try:
        document = json.loads(file_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ForestError(f"could not parse {path}: {e}", {"path": str(path)})
    forest = forest_from_dict(document)
    logger.info(f"Loaded forest with {forest.num_trees} trees from {file_path}")
    return forest
