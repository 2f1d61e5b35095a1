import logging
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from shapley_forest.core.exceptions import DatasetError
from shapley_forest.crud.datasets import read_frame
from shapley_forest.models.dataset import Dataset
from shapley_forest.schemas.generator import ColumnKind, Experiment, GeneratorSpec
from shapley_forest.services.ground_truth import exp2_model_for, linear_model_for

logger = logging.getLogger(__name__)


def encode_categorical(
    labels: Sequence[str],
    output: np.ndarray,
    categories: Sequence[str] = (),
) -> Tuple[np.ndarray, Dict[str, int]]:
    """
    Order categories by the mean output of their rows.

    Ranks are 0-based; equal means fall back to label order. Labels listed
    in ``categories`` but absent from the rows are ranked last, in label order.
    """
    labels = np.asarray(labels, dtype=object)
    output = np.asarray(output, dtype=float)
    if len(labels) == 0:
        raise DatasetError("cannot encode an empty categorical column")
    present = sorted(set(labels.tolist()))
    # fsum makes the means independent of row order
    means = {
        label: math.fsum(output[labels == label]) / int((labels == label).sum())
        for label in present
    }
    ordered = sorted(present, key=lambda label: (means[label], label))
    ordered += sorted(set(categories) - set(present))
    mapping = {label: rank for rank, label in enumerate(ordered)}
    encoded = np.array([mapping[label] for label in labels], dtype=float)
    return encoded, mapping


def load_csv(path: str, schema: List[ColumnKind], target: str) -> Dataset:
    """Read a CSV file into a Dataset; every non-target column follows the schema in order"""
    frame = read_frame(path)
    if target not in frame.columns:
        raise DatasetError(f"target column '{target}' not in header", {"header": list(frame.columns)})
    names = [name for name in frame.columns if name != target]
    if len(names) != len(schema):
        raise DatasetError(
            f"header has {len(names)} feature columns but the schema lists {len(schema)}",
            {"header": list(frame.columns)},
        )

    output = _parse_numeric(frame, target)
    features = np.empty((len(frame), len(names)))
    encoding_maps: Dict[int, Dict[str, int]] = {}
    for j, (name, kind) in enumerate(zip(names, schema)):
        if kind.is_categorical:
            raw = frame[name].to_numpy(dtype=object)
            unknown = sorted(set(raw.tolist()) - set(kind.categories))
            if unknown:
                raise DatasetError(
                    f"column '{name}' holds label '{unknown[0]}' absent from its category list",
                    {"column": name, "labels": unknown},
                )
            features[:, j], encoding_maps[j] = encode_categorical(raw, output, kind.categories)
        else:
            features[:, j] = _parse_numeric(frame, name)

    dataset = Dataset(
        features=features,
        output=output,
        columns=list(schema),
        encoding_maps=encoding_maps,
        names=names,
        target_name=target,
    )
    logger.info(f"Loaded {path}: n={dataset.n}, p={dataset.p}, categorical={len(encoding_maps)}")
    return dataset


def _parse_numeric(frame: pd.DataFrame, name: str) -> np.ndarray:
    column = frame[name]
    bad = np.flatnonzero(pd.to_numeric(column, errors="coerce").isna().to_numpy())
    if bad.size:
        row = int(bad[0])
        raise DatasetError(
            f"unparseable value '{column.iloc[row]}' at row {row + 1}, column '{name}'",
            {"row": row + 1, "column": name},
        )
    # object -> float goes through float() per cell, which round-trips repr output exactly
    return column.astype(float).to_numpy()


def _category_labels(levels: int) -> List[str]:
    if levels <= 26:
        return [chr(ord("a") + i) for i in range(levels)]
    width = len(str(levels - 1))
    return [f"k{i:0{width}d}" for i in range(levels)]


def _categorical_dataset(
    continuous: np.ndarray,
    categorical: List[np.ndarray],
    levels: List[int],
    output: np.ndarray,
) -> Dataset:
    p = continuous.shape[1] + len(categorical)
    features = np.empty((len(output), p))
    features[:, : continuous.shape[1]] = continuous
    columns = [ColumnKind.continuous()] * continuous.shape[1]
    encoding_maps = {}
    for offset, (raw, count) in enumerate(zip(categorical, levels)):
        j = continuous.shape[1] + offset
        labels = _category_labels(count)
        features[:, j], encoding_maps[j] = encode_categorical(raw, output, labels)
        columns.append(ColumnKind.categorical(labels))
    return Dataset(features=features, output=output, columns=columns, encoding_maps=encoding_maps)


def _gaussian(rng: np.random.Generator, n: int, sigma: np.ndarray) -> np.ndarray:
    return rng.standard_normal((n, sigma.shape[0])) @ np.linalg.cholesky(sigma).T


def generate(spec: GeneratorSpec) -> Dataset:
    """
    Draw a synthetic sample; a pure function of the generator spec.

    Draw order per experiment: correlated inputs, noise, then any appended
    dummy or noise columns, all from one generator seeded with spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    params = spec.params
    n = spec.n

    if spec.experiment in (Experiment.EXP1A, Experiment.EXP1B, Experiment.CUSTOM):
        model = linear_model_for(spec)
        p_base = model.base_p - (0 if spec.experiment == Experiment.CUSTOM else params.dummy_count)
        beta = model.beta[:p_base]
        sigma = model.sigma[:p_base, :p_base]
        X = _gaussian(rng, n, sigma)
        y = X @ beta + math.sqrt(model.noise_var) * rng.standard_normal(n)
        if spec.experiment == Experiment.CUSTOM:
            return Dataset(features=X, output=y, columns=[ColumnKind.continuous()] * p_base)
        copies = np.repeat(X[:, [params.duplicate_source]], params.duplicate_count, axis=1)
        blocks = [X, copies, rng.standard_normal((n, params.dummy_count))]
        if spec.experiment == Experiment.EXP1B:
            blocks.append(rng.standard_normal((n, params.extra_noise_count)))
        features = np.hstack(blocks)
    elif spec.experiment == Experiment.EXP2:
        model = exp2_model_for(spec)
        X = _gaussian(rng, n, model.covariance()[:10, :10])
        first = X[:, 0] * X[:, 1] * (X[:, 2] > 0)
        second = X[:, 3] * X[:, 4] * (X[:, 2] < 0)
        third = X[:, 5] * X[:, 6] * (X[:, 7] > 0)
        fourth = X[:, 8] * X[:, 9] * (X[:, 7] < 0)
        y = (
            math.sqrt(model.alpha) * (model.a * first + model.b * second)
            + math.sqrt(model.beta) * (model.c * third + model.d * fourth)
            + math.sqrt(model.noise_var) * rng.standard_normal(n)
        )
        features = np.hstack([X, rng.standard_normal((n, model.dummy_count))])
    elif spec.experiment == Experiment.EXP3:
        levels = params.category_levels
        # X1 and X2 each enter on one level of the first categorical
        signal_variance = 2.0 / levels[0]
        noise_var = params.noise_fraction / (1.0 - params.noise_fraction) * signal_variance
        continuous = rng.standard_normal((n, 2))
        categorical = [np.array(_category_labels(count), dtype=object)[rng.integers(0, count, n)] for count in levels]
        y = (
            continuous[:, 0] * (categorical[0] == "a")
            + continuous[:, 1] * (categorical[0] == "b")
            + math.sqrt(noise_var) * rng.standard_normal(n)
        )
        dataset = _categorical_dataset(continuous, categorical, levels, y)
        logger.info(f"Generated {spec.experiment.value}: n={n}, p={dataset.p}")
        return dataset
    else:
        raise DatasetError(f"unknown experiment '{spec.experiment}'")

    dataset = Dataset(features=features, output=y, columns=[ColumnKind.continuous()] * features.shape[1])
    logger.info(f"Generated {spec.experiment.value}: n={n}, p={dataset.p}")
    return dataset
