"""Least-squares cross-validated bandwidth selection over a candidate grid."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InfeasibleBandwidthError
from .impute import ImputationSet
from .panel import PeriodSlice

__all__ = ["BandwidthGrid", "CvReport", "default_grid", "cv_error", "select"]

INFEASIBLE = math.inf


@dataclass(frozen=True)
class BandwidthGrid:
    candidates: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(v) for v in self.candidates)
        if not c:
            raise ConfigError("bandwidth grid must be nonempty")
        if any(not v > 0 or not math.isfinite(v) for v in c):
            raise ConfigError("bandwidth candidates must be positive and finite")
        if any(b <= a for a, b in zip(c, c[1:])):
            raise ConfigError("bandwidth candidates must be strictly increasing")
        object.__setattr__(self, "candidates", c)

    @classmethod
    def geometric(cls, lo: float, hi: float, count: int) -> "BandwidthGrid":
        if not 0 < lo < hi:
            raise ConfigError(f"grid range must satisfy 0 < lo < hi, got [{lo}, {hi}]")
        if count < 1:
            raise ConfigError(f"grid count must be >= 1, got {count}")
        if count == 1:
            return cls((lo,))
        return cls(tuple(np.geomspace(lo, hi, count)))


def default_grid() -> BandwidthGrid:
    """30 geometrically spaced candidates spanning [0.05, 5]."""
    return BandwidthGrid.geometric(0.05, 5.0, 30)


@dataclass(frozen=True)
class CvReport:
    grid: BandwidthGrid
    errors: tuple[float, ...]  # INFEASIBLE marks skipped candidates
    h_cv: float
    rule: str  # "cv" or "fixed"

    @property
    def skipped(self) -> tuple[float, ...]:
        return tuple(
            h for h, e in zip(self.grid.candidates, self.errors) if e == INFEASIBLE
        )


def cv_error(slice_: PeriodSlice, imp: ImputationSet) -> float:
    """Own-group squared imputation error, summed over units and divided by N.

    Treated units contribute (y - mu1)^2, controls (y - mu0)^2. The value
    is INFEASIBLE when any unit's own-group imputation or propensity has a
    zero kernel denominator.
    """
    treated = slice_.w == 1.0
    own_feasible = np.where(treated, imp.feasible_mu1, imp.feasible_mu0)
    if not (own_feasible.all() and imp.feasible_p.all()):
        return INFEASIBLE
    fitted = np.where(treated, imp.mu1, imp.mu0)
    resid = slice_.y - fitted
    return float(resid @ resid) / slice_.y.shape[0]


def select(grid: BandwidthGrid, errors) -> CvReport:
    """Pick the smallest-h minimizer of the finite CV errors.

    Infeasible candidates are skipped; if every candidate is infeasible a
    hard error advises widening the grid.
    """
    errs = tuple(float(e) for e in errors)
    if len(errs) != len(grid.candidates):
        raise ConfigError("one CV error per grid candidate is required")
    finite = [(e, i) for i, e in enumerate(errs) if e != INFEASIBLE]
    if not finite:
        raise InfeasibleBandwidthError(
            "every bandwidth candidate was infeasible; widen the grid",
            stage="bandwidth",
        )
    best = min(finite, key=lambda pair: (pair[0], pair[1]))
    return CvReport(grid=grid, errors=errs, h_cv=grid.candidates[best[1]], rule="cv")
