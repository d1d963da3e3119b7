"""Fold plans for cross-fitting.

Three modes: ``none`` (single fold, donors are all other units), ``kfold``
(balanced random partition, donors are everything outside a unit's fold),
and ``loo`` (singleton folds). Partitioning is a seeded shuffle followed
by contiguous chunking, so plans are uniform in distribution and cheap to
reproduce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["FoldMode", "FoldPlan", "partition", "donors"]


class FoldMode:
    NONE = "none"
    KFOLD = "kfold"
    LOO = "loo"


@dataclass(frozen=True)
class FoldPlan:
    assignment: np.ndarray  # fold index per unit
    k: int
    mode: str
    seed: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.intp)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    def fold_members(self, k: int) -> np.ndarray:
        return np.nonzero(self.assignment == k)[0]

    def folds(self):
        for k in range(self.k):
            yield k, self.fold_members(k)


def partition(n: int, k: int, seed: int = 0) -> FoldPlan:
    """Randomly partition n units into k folds with sizes differing by <= 1.

    k = 1 gives the no-cross-fitting plan, k = n leave-one-out. The same
    (n, k, seed) always produces the same assignment.
    """
    if n <= 0:
        raise ConfigError(f"unit count must be positive, got {n}")
    if not 1 <= k <= n:
        raise ConfigError(f"fold count must satisfy 1 <= k <= {n}, got {k}")
    if k == 1:
        mode = FoldMode.NONE
    elif k == n:
        mode = FoldMode.LOO
    else:
        mode = FoldMode.KFOLD
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    order = rng.permutation(n)
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    assignment = np.empty(n, dtype=np.intp)
    start = 0
    for fold, size in enumerate(sizes):
        assignment[order[start : start + size]] = fold
        start += size
    return FoldPlan(assignment=assignment, k=k, mode=mode, seed=seed)


def donors(plan: FoldPlan, i: int) -> np.ndarray:
    """Index set of permitted donors for unit i under the plan.

    Under kfold/loo this is everything outside i's fold; under the no-CF
    plan it is every other unit (the unit itself is handled separately by
    the imputation layer when literal uncrossfit smoothing is requested).
    """
    if not 0 <= i < plan.n:
        raise ConfigError(f"unit index {i} out of range [0, {plan.n})")
    if plan.mode == FoldMode.NONE:
        mask = np.ones(plan.n, dtype=bool)
        mask[i] = False
        return np.nonzero(mask)[0]
    return np.nonzero(plan.assignment != plan.assignment[i])[0]
