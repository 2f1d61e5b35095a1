import logging
import math
from collections import Counter
from typing import Optional

import numpy as np

from shapley_forest.core.config import settings
from shapley_forest.core.exceptions import SamplingError
from shapley_forest.models.forest import LEAF, Forest
from shapley_forest.models.subsets import DrawEntry, SubsetDraw, SubsetOrigin, SubsetTable, VarSubset

logger = logging.getLogger(__name__)


def extract_path_subsets(forest: Forest) -> SubsetTable:
    """
    Count the variable sets met along tree paths.

    Every internal node contributes one occurrence of the set of split
    variables from the root down to and including its own split. Empty and
    full sets are dropped; ``path_nodes`` counts all internal nodes.
    """
    full = (1 << forest.p) - 1
    counts: Counter = Counter()
    path_nodes = 0
    for tree in forest.trees:
        masks = tree.path_masks()
        for node in np.flatnonzero(tree.feature != LEAF):
            path_nodes += 1
            if masks[node] != full:
                counts[masks[node]] += 1
    table = SubsetTable(
        p=forest.p,
        counts={VarSubset(mask, forest.p): count for mask, count in counts.items()},
        path_nodes=path_nodes,
    )
    logger.info(f"Extracted {len(table)} distinct subsets from {path_nodes} path nodes")
    if table.is_empty:
        logger.warning("Subset table is empty; the forest never split below the full set")
    return table


def complement_floor(table: SubsetTable, floor: Optional[float] = None) -> float:
    """p_hat used for complements the forest never produced"""
    if floor is None:
        floor = settings.complement_floor
    if floor is None:
        floor = 1.0 / max(table.path_nodes, table.total, 1)
    if not floor > 0:
        raise SamplingError(f"complement floor must be positive, got {floor}")
    return float(floor)


def draw_importance(
    table: SubsetTable,
    K: int,
    seed: int,
    floor: Optional[float] = None,
) -> SubsetDraw:
    """K i.i.d. draws from the path frequencies, each followed by its complement"""
    if table.is_empty:
        raise SamplingError("subset table is empty: the forest never split (degenerate fit)")
    if K < 1:
        raise SamplingError(f"number of subsets K must be >= 1, got {K}")
    rng = np.random.default_rng(seed)
    subsets = table.subsets()
    frequencies = table.frequencies()
    floor = complement_floor(table, floor)

    entries = []
    floored = 0
    for idx in rng.choice(len(subsets), size=K, p=frequencies):
        subset = subsets[idx]
        complement = subset.complement()
        p_complement = table.frequency(complement)
        if p_complement == 0.0:
            p_complement = floor
            floored += 1
        entries.append(DrawEntry(subset, float(frequencies[idx]), SubsetOrigin.DRAWN))
        entries.append(DrawEntry(complement, p_complement, SubsetOrigin.COMPLEMENT))
    if floored:
        logger.debug(f"{floored} of {K} complements absent from the table; p_hat floor {floor:.3g}")
    return SubsetDraw(entries=tuple(entries), K=K, p=table.p, sampler="pis", floored=floored)


def size_distribution(p: int) -> np.ndarray:
    """P(|U| = s) for s = 1..p-1, proportional to the kernel weight mass (p-1)/(s(p-s))"""
    sizes = np.arange(1, p)
    mass = (p - 1) / (sizes * (p - sizes))
    return mass / mass.sum()


def draw_monte_carlo(p: int, K: int, seed: int) -> SubsetDraw:
    """
    Paired Monte-Carlo baseline: draw a size from the kernel weight mass,
    then a uniform subset of that size; p_hat is the exact probability.
    """
    if p < 2:
        raise SamplingError(f"Monte-Carlo sampling needs p >= 2, got {p}")
    if K < 1:
        raise SamplingError(f"number of subsets K must be >= 1, got {K}")
    rng = np.random.default_rng(seed)
    size_probs = size_distribution(p)
    entries = []
    for size in rng.choice(np.arange(1, p), size=K, p=size_probs):
        size = int(size)
        subset = VarSubset.from_indices(rng.choice(p, size=size, replace=False), p)
        p_hat = float(size_probs[size - 1]) / math.comb(p, size)
        entries.append(DrawEntry(subset, p_hat, SubsetOrigin.DRAWN))
        entries.append(DrawEntry(subset.complement(), p_hat, SubsetOrigin.COMPLEMENT))
    return SubsetDraw(entries=tuple(entries), K=K, p=p, sampler="pmc")


def full_enumeration_draw(p: int) -> SubsetDraw:
    """Every non-trivial subset exactly once, paired with its complement, uniform p_hat"""
    if p < 2:
        raise SamplingError(f"enumeration needs p >= 2, got {p}")
    full = (1 << p) - 1
    p_hat = 1.0 / (2**p - 2)
    entries = []
    for mask in range(1, full):
        if mask < full ^ mask:
            entries.append(DrawEntry(VarSubset(mask, p), p_hat, SubsetOrigin.DRAWN))
            entries.append(DrawEntry(VarSubset(full ^ mask, p), p_hat, SubsetOrigin.COMPLEMENT))
    return SubsetDraw(entries=tuple(entries), K=len(entries) // 2, p=p, sampler="enumeration")
