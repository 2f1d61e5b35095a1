from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Tuple

import numpy as np

from shapley_forest.core.exceptions import SamplingError


@dataclass(frozen=True, order=True)
class VarSubset:
    """
    Subset of the variables {0, ..., p-1} stored as an int bitmask.

    Python ints are unbounded, so the same representation serves p = 15
    and p = 100 alike; ``indices`` gives the sorted index view.
    """

    mask: int
    p: int

    def __post_init__(self):
        if self.p < 1:
            raise SamplingError(f"subset dimension must be positive, got p={self.p}")
        if self.mask < 0 or self.mask >> self.p:
            raise SamplingError(f"mask {self.mask:#x} has bits outside {self.p} variables")

    @classmethod
    def from_indices(cls, indices: Iterable[int], p: int) -> "VarSubset":
        mask = 0
        for j in indices:
            j = int(j)
            if not 0 <= j < p:
                raise SamplingError(f"variable index {j} outside 0..{p - 1}")
            mask |= 1 << j
        return cls(mask, p)

    @classmethod
    def full(cls, p: int) -> "VarSubset":
        return cls((1 << p) - 1, p)

    @property
    def indices(self) -> Tuple[int, ...]:
        mask, out, j = self.mask, [], 0
        while mask:
            if mask & 1:
                out.append(j)
            mask >>= 1
            j += 1
        return tuple(out)

    @property
    def size(self) -> int:
        return bin(self.mask).count("1")

    @property
    def is_empty(self) -> bool:
        return self.mask == 0

    @property
    def is_full(self) -> bool:
        return self.mask == (1 << self.p) - 1

    def complement(self) -> "VarSubset":
        return VarSubset(((1 << self.p) - 1) ^ self.mask, self.p)

    def __contains__(self, j: int) -> bool:
        return bool(self.mask >> j & 1)

    def indicator(self) -> np.ndarray:
        vector = np.zeros(self.p)
        vector[list(self.indices)] = 1.0
        return vector

    def key(self) -> str:
        """Space separated sorted 1-based indices, as written to CSV files"""
        return " ".join(str(j + 1) for j in self.indices)

    @classmethod
    def from_key(cls, key: str, p: int) -> "VarSubset":
        return cls.from_indices((int(token) - 1 for token in key.split()), p)


@dataclass(frozen=True)
class SubsetTable:
    """Occurrence counts of variable subsets along forest paths"""

    p: int
    counts: Dict[VarSubset, int]
    path_nodes: int = 0

    def __post_init__(self):
        for subset, count in self.counts.items():
            if subset.is_empty or subset.is_full:
                raise SamplingError("empty and full subsets cannot be stored in a subset table")
            if count < 1:
                raise SamplingError(f"subset {{{subset.key()}}} stored with count {count}")
        ordered = dict(sorted(self.counts.items(), key=lambda item: item[0].mask))
        object.__setattr__(self, "counts", ordered)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def is_empty(self) -> bool:
        return not self.counts

    def __len__(self) -> int:
        return len(self.counts)

    def subsets(self) -> List[VarSubset]:
        return list(self.counts)

    def frequencies(self) -> np.ndarray:
        """Normalized p_hat in canonical (mask ascending) order"""
        counts = np.fromiter(self.counts.values(), dtype=float, count=len(self.counts))
        return counts / counts.sum()

    def frequency(self, subset: VarSubset) -> float:
        count = self.counts.get(subset, 0)
        return count / self.total if count else 0.0


class SubsetOrigin(str, Enum):
    DRAWN = "drawn"
    COMPLEMENT = "complement"


@dataclass(frozen=True)
class DrawEntry:
    subset: VarSubset
    p_hat: float
    origin: SubsetOrigin


@dataclass(frozen=True)
class SubsetDraw:
    """Paired draws: entry 2i+1 is always the complement of entry 2i"""

    entries: Tuple[DrawEntry, ...]
    K: int
    p: int
    sampler: str = "pis"
    floored: int = field(default=0)

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        if len(entries) != 2 * self.K:
            raise SamplingError(f"draw holds {len(entries)} entries, expected {2 * self.K}")
        for i in range(0, len(entries), 2):
            drawn, paired = entries[i], entries[i + 1]
            if drawn.origin != SubsetOrigin.DRAWN or paired.origin != SubsetOrigin.COMPLEMENT:
                raise SamplingError(f"entries {i} and {i + 1} are not a drawn/complement pair")
            if paired.subset != drawn.subset.complement():
                raise SamplingError(f"entry {i + 1} is not the complement of entry {i}")
            if not drawn.p_hat > 0 or not paired.p_hat > 0:
                raise SamplingError(f"pair {i // 2} carries a non-positive p_hat")

    def __len__(self) -> int:
        return len(self.entries)

    def subsets(self) -> List[VarSubset]:
        return [entry.subset for entry in self.entries]

    def unique_subsets(self) -> List[VarSubset]:
        """Distinct subsets in order of first appearance"""
        return list(dict.fromkeys(self.subsets()))

    def drawn_variables(self) -> VarSubset:
        """Union of the drawn (non-complement) subsets"""
        mask = 0
        for entry in self.entries[::2]:
            mask |= entry.subset.mask
        return VarSubset(mask, self.p)
