"""Kernel-smoothed imputation of counterfactual means and propensities.

For each unit the post-period control-outcome mean, treated-outcome mean,
and treatment propensity are imputed as kernel-weighted averages over the
unit's permitted donors, with weights K(d/h). Zero-denominator cases are
reported through per-unit feasibility flags, never as NaNs that leak into
arithmetic: a unit with an infeasible quantity makes the *bandwidth*
infeasible downstream rather than being dropped silently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .distance import DistanceMatrix
from .errors import ConfigError, ShapeError
from .kernels import KernelSpec
from .panel import PeriodSlice

__all__ = ["ImputationSet", "impute"]


@dataclass(frozen=True)
class ImputationSet:
    """Per-unit imputations at one post-treatment period and one bandwidth.

    ``mu0``/``mu1``/``phat`` hold NaN sentinels wherever the matching
    feasibility flag is False; consumers must consult the flags first.
    ``n_clipped`` counts propensities trimmed down to ``1 - eps_trim``.
    """

    mu0: np.ndarray
    mu1: np.ndarray
    phat: np.ndarray
    h: float
    feasible_mu0: np.ndarray
    feasible_mu1: np.ndarray
    feasible_p: np.ndarray
    n_clipped: int

    def with_propensity(self, p: np.ndarray, eps_trim: float) -> "ImputationSet":
        """Replace the imputed propensity by an externally supplied one."""
        p = np.asarray(p, dtype=np.float64)
        if p.shape != self.phat.shape:
            raise ShapeError("propensity override has the wrong length")
        p, clipped = _trim(p.copy(), np.ones(p.shape[0], dtype=bool), eps_trim)
        return replace(
            self,
            phat=p,
            feasible_p=np.ones(p.shape[0], dtype=bool),
            n_clipped=clipped,
        )


def _trim(p: np.ndarray, feasible: np.ndarray, eps_trim: float) -> tuple[np.ndarray, int]:
    np.clip(p, 0.0, 1.0, out=p)  # shave float roundoff only
    cap = 1.0 - eps_trim
    over = feasible & (p > cap)
    p[over] = cap
    return p, int(over.sum())


def impute(
    dist: DistanceMatrix,
    slice_: PeriodSlice,
    spec: KernelSpec,
    h: float,
    eps_trim: float = 0.01,
    include_self: bool = False,
) -> ImputationSet:
    """Impute mu0, mu1, and the propensity for every unit at bandwidth h.

    Parameters
    ----------
    dist : DistanceMatrix
        Pairwise distances; only pairs flagged as computed receive weight.
    slice_ : PeriodSlice
        Outcomes and treatment indicators at the target period.
    spec : KernelSpec
        Smoothing kernel.
    h : float
        Bandwidth, > 0.
    eps_trim : float
        Propensities are clipped to at most ``1 - eps_trim``; clips are
        counted in ``n_clipped``.
    include_self : bool
        When True each unit also acts as its own donor at distance zero
        (the literal uncrossfit smoother). Only meaningful without a fold
        plan restricting donors.
    """
    if not h > 0 or not np.isfinite(h):
        raise ConfigError(f"bandwidth must be positive and finite, got {h}")
    if not 0.0 <= eps_trim < 0.5:
        raise ConfigError(f"eps_trim must lie in [0, 0.5), got {eps_trim}")
    n = dist.n
    if slice_.y.shape[0] != n:
        raise ShapeError("distance matrix and period slice disagree on N")

    weights = np.zeros((n, n))
    m = dist.computed
    weights[m] = spec(dist.values[m] / h)
    if include_self:
        idx = np.arange(n)
        weights[idx, idx] = spec(0.0)

    y = slice_.y
    w1 = slice_.w
    w0 = 1.0 - w1

    den0 = weights @ w0
    den1 = weights @ w1
    denp = den0 + den1
    feas0 = den0 > 0.0
    feas1 = den1 > 0.0
    feasp = denp > 0.0

    mu0 = np.full(n, np.nan)
    mu1 = np.full(n, np.nan)
    phat = np.full(n, np.nan)
    num0 = weights @ (w0 * y)
    num1 = weights @ (w1 * y)
    mu0[feas0] = num0[feas0] / den0[feas0]
    mu1[feas1] = num1[feas1] / den1[feas1]
    phat[feasp] = den1[feasp] / denp[feasp]
    phat, n_clipped = _trim(phat, feasp, eps_trim)

    return ImputationSet(
        mu0=mu0,
        mu1=mu1,
        phat=phat,
        h=float(h),
        feasible_mu0=feas0,
        feasible_mu1=feas1,
        feasible_p=feasp,
        n_clipped=n_clipped,
    )
