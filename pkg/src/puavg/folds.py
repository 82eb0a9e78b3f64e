"""Stratified K-fold splits.

The target domain's labeled (z=1) and unlabeled (z=0) rows are partitioned
into K random subsets separately, so every fold keeps the labeled/unlabeled
ratio; fold sizes within a stratum differ by at most one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DomainDataset
from .errors import DataError


def stratified_assignments(strata: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Per-row fold indices in 0..k-1, stratified by a binary indicator."""
    strata = np.asarray(strata)
    out = np.full(len(strata), -1, dtype=int)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    for value in (1, 0):
        idx = np.flatnonzero(strata == value)
        idx = rng.permutation(idx)
        m = len(idx)
        base, extra = divmod(m, k)
        start = 0
        for fold in range(k):
            size = base + (1 if fold < extra else 0)
            out[idx[start:start + size]] = fold
            start += size
    return out


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    strata: np.ndarray

    def fold_rows(self, fold: int) -> np.ndarray:
        return self.assignments == fold

    def complement_rows(self, fold: int) -> np.ndarray:
        return self.assignments != fold


def make_folds(target: DomainDataset, k: int, seed: int) -> FoldPlan:
    """Stratified fold plan for a PU target domain."""
    if target.scheme != "pu":
        raise DataError(f"fold plan expects a PU target, got {target.scheme!r}")
    if k < 2:
        raise DataError(f"K must be at least 2, got {k}")
    if target.n_labeled < k or target.n_unlabeled < k:
        raise DataError(
            f"too few rows to build {k} folds: {target.n_labeled} labeled, "
            f"{target.n_unlabeled} unlabeled")
    assignments = stratified_assignments(target.z, k, seed)
    return FoldPlan(k=k, assignments=assignments, strata=target.z.copy())
