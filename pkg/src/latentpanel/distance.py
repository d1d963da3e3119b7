"""Pseudo-distances between units from pre-treatment outcome histories.

For units i and j the distance is the largest absolute inner product,
over probe units l distinct from both, between l's pre-treatment history
and the difference of i's and j's histories, scaled by 1/t0. Factoring
through the Gram matrix G[k, i] = <Y_k, Y_i> / t0 turns this into
max over l of |G[l, i] - G[l, j]|, which costs O(N^2 t0) + O(N^3) instead
of the naive O(N^3 t0).

The O(N^3) max-difference scan is the hot loop of every Monte Carlo run.
A compiled extension implements it when available; a chunked NumPy scan
is selected at import otherwise. Both produce bit-identical output.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .crossfit import FoldMode, FoldPlan
from .errors import DataError, ShapeError
from .panel import Panel

__all__ = [
    "DistanceMatrix",
    "gram",
    "pseudo_distances",
    "oracle_l2_distances",
    "HAVE_COMPILED",
]

if os.environ.get("LATENTPANEL_PURE") == "1":
    _fast = None
else:
    try:
        from . import _fastdist as _fast
    except ImportError:
        _fast = None

HAVE_COMPILED = _fast is not None


@dataclass(frozen=True)
class DistanceMatrix:
    """Pairwise distances with an explicit computed-pair mask.

    ``values[i, j]`` is meaningful only where ``computed[i, j]`` is True;
    other entries are sentinels (NaN) and must never reach arithmetic.
    """

    values: np.ndarray
    computed: np.ndarray
    plan: FoldPlan
    t0: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        c = np.asarray(self.computed, dtype=bool)
        if v.shape != c.shape or v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ShapeError("values/computed must be matching square matrices")
        v.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "computed", c)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def gram(panel: Panel) -> np.ndarray:
    """Symmetric matrix of scaled pre-treatment inner products.

    G[k, i] = <Y_k, Y_i over periods 1..t0> / t0. Symmetry is enforced
    exactly by mirroring the lower triangle.
    """
    y = panel.pre_outcomes()
    g = (y @ y.T) / panel.t0
    g = np.tril(g) + np.tril(g, -1).T
    return g


def _offdiag_mask(n: int) -> np.ndarray:
    m = np.ones((n, n), dtype=bool)
    np.fill_diagonal(m, False)
    return m


def _all_pairs_numpy(g: np.ndarray, chunk: int = 32) -> np.ndarray:
    n = g.shape[0]
    out = np.empty((n, n))
    cols = np.arange(n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = np.abs(g[start:stop, None, :] - g[None, :, :])  # (c, j, l)
        block[:, cols, cols] = -np.inf  # exclude l == j
        rows = np.arange(stop - start)
        block[rows, :, start + rows] = -np.inf  # exclude l == i
        out[start:stop] = block.max(axis=2)
    np.fill_diagonal(out, 0.0)
    return out


def _fold_block_numpy(
    g: np.ndarray, targets: np.ndarray, donors: np.ndarray, chunk: int = 32
) -> np.ndarray:
    gdd = g[np.ix_(donors, donors)]  # (j, l)
    git = g[np.ix_(targets, donors)]  # (i, l)
    nd = donors.shape[0]
    cols = np.arange(nd)
    out = np.empty((targets.shape[0], nd))
    for start in range(0, targets.shape[0], chunk):
        stop = min(start + chunk, targets.shape[0])
        block = np.abs(git[start:stop, None, :] - gdd[None, :, :])  # (c, j, l)
        block[:, cols, cols] = -np.inf  # exclude l == j
        out[start:stop] = block.max(axis=2)
    return out


def _backend(name):
    if name == "compiled":
        if _fast is None:
            raise RuntimeError("compiled distance backend is not available")
        return _fast
    if name == "python":
        return None
    if name in (None, "auto"):
        return _fast
    raise ValueError(f"unknown backend {name!r}")


def _check_complements(plan: FoldPlan) -> None:
    # The max over probe units needs a healthy complement; require >= 3.
    if plan.mode == FoldMode.NONE or plan.mode == FoldMode.LOO:
        if plan.n - 1 < 3:
            raise DataError(
                f"need at least 4 units for pairwise distances, got {plan.n}",
                stage="distances",
            )
        return
    sizes = np.bincount(plan.assignment, minlength=plan.k)
    smallest_complement = plan.n - sizes.max()
    if smallest_complement < 3:
        raise DataError(
            f"fold complement too small ({smallest_complement} < 3 units)",
            stage="distances",
        )


def pseudo_distances(
    panel: Panel, plan: FoldPlan, backend: str | None = None
) -> DistanceMatrix:
    """Cross-fitted pseudo-distances for every permitted (target, donor) pair.

    Under a k-fold plan, targets in fold k see donors outside the fold and
    the max runs over probe units outside the fold (excluding the donor).
    Under the no-CF and leave-one-out plans both the donors and the probes
    are global with self/donor exclusions, so the two coincide.
    """
    if plan.n != panel.n:
        raise ShapeError(
            f"plan covers {plan.n} units but panel has {panel.n}", stage="distances"
        )
    _check_complements(plan)
    g = gram(panel)
    fast = _backend(backend)
    n = panel.n
    if plan.mode in (FoldMode.NONE, FoldMode.LOO):
        if fast is not None:
            values = fast.dist_all_pairs(g)
        else:
            values = _all_pairs_numpy(g)
        computed = _offdiag_mask(n)
        values = np.where(computed, values, np.nan)
        return DistanceMatrix(values=values, computed=computed, plan=plan, t0=panel.t0)
    values = np.full((n, n), np.nan)
    computed = np.zeros((n, n), dtype=bool)
    for k, members in plan.folds():
        donors_k = np.nonzero(plan.assignment != k)[0]
        if fast is not None:
            block = fast.dist_fold(
                np.ascontiguousarray(g[np.ix_(members, donors_k)]),
                np.ascontiguousarray(g[np.ix_(donors_k, donors_k)]),
            )
        else:
            block = _fold_block_numpy(g, members, donors_k)
        values[np.ix_(members, donors_k)] = block
        computed[np.ix_(members, donors_k)] = True
    return DistanceMatrix(values=values, computed=computed, plan=plan, t0=panel.t0)


def oracle_l2_distances(alphas: np.ndarray, plan: FoldPlan) -> DistanceMatrix:
    """Euclidean distances between latent unit characteristics.

    Used by the infeasible estimator variants where the true unit factors
    are known; no probe-unit maximization is involved.
    """
    a = np.asarray(alphas, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ShapeError("alphas must be a vector or a 2-D (N, d) array")
    if a.shape[0] != plan.n:
        raise ShapeError(f"got {a.shape[0]} alpha rows for {plan.n} units")
    diff = a[:, None, :] - a[None, :, :]
    values = np.sqrt(np.sum(diff * diff, axis=2))
    n = plan.n
    if plan.mode in (FoldMode.NONE, FoldMode.LOO):
        computed = _offdiag_mask(n)
    else:
        computed = np.zeros((n, n), dtype=bool)
        for k, members in plan.folds():
            donors_k = np.nonzero(plan.assignment != k)[0]
            computed[np.ix_(members, donors_k)] = True
    values = np.where(computed, values, np.nan)
    return DistanceMatrix(values=values, computed=computed, plan=plan, t0=0)
