"""Doubly robust ATT estimation with cross-fitting.

The per-unit score combines the observed treated outcome with a
propensity-weighted correction built from the imputed untreated mean:

    psi_i = y_i w_i - [(1 - w_i) y_i p_i + (w_i - p_i) mu0_i] / (1 - p_i)

The point estimate averages psi over treated counts, the variance uses
the same scores centered at (n1/N) * ATT, and the confidence interval is
a plain normal interval on sqrt(V/N). ``estimate_period`` wires the whole
pipeline: fold plan, cross-fitted distances, per-bandwidth imputations,
CV selection, and the final estimate.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field, replace

import numpy as np

from ._stats import norm_quantile
from .bandwidth import INFEASIBLE, BandwidthGrid, CvReport, cv_error, default_grid, select
from .crossfit import FoldMode, partition
from .distance import oracle_l2_distances, pseudo_distances
from .errors import (
    ConfigError,
    DataError,
    EstimationError,
    InfeasibleBandwidthError,
    LatentPanelError,
)
from .impute import ImputationSet, impute
from .kernels import KernelSpec
from .panel import Panel, PeriodSlice, slice_period, validate

__all__ = [
    "AttEstimate",
    "CfMeanEstimate",
    "Diagnostics",
    "EstimatorConfig",
    "score_vector",
    "cf_score_vector",
    "dr_att",
    "dr_counterfactual_mean",
    "counterfactual_mean",
    "estimate_period",
    "estimate_cf_mean",
]


@dataclass(frozen=True)
class Diagnostics:
    n_clipped: int = 0
    skipped_bandwidths: tuple[float, ...] = ()
    substituted_h: bool = False
    fold_seed: int | None = None
    fold_mode: str | None = None
    selection_rule: str = "fixed"


@dataclass(frozen=True)
class AttEstimate:
    att: float
    variance: float
    ci_low: float
    ci_high: float
    alpha: float
    h_used: float
    n1: int
    n: int
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def se(self) -> float:
        return float(np.sqrt(self.variance / self.n))


@dataclass(frozen=True)
class CfMeanEstimate:
    """Counterfactual mean of the treated group with its own score-based CI."""

    value: float
    variance: float
    ci_low: float
    ci_high: float
    alpha: float
    h_used: float
    n1: int
    n: int
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def se(self) -> float:
        return float(np.sqrt(self.variance / self.n))


@dataclass(frozen=True)
class EstimatorConfig:
    """Options driving ``estimate_period``.

    ``folds`` is an integer fold count, "loo", or "none". With
    ``distance_source="oracle_l2"`` the true per-unit factors must be
    supplied in ``alphas``; ``true_p`` optionally overrides the imputed
    propensity (the infeasible known-propensity variant). Under the
    no-cross-fitting plan, ``self_donors`` keeps each unit in its own
    final donor set (the literal uncrossfit smoother); bandwidth CV always
    scores held-out imputations regardless.
    """

    folds: int | str = 2
    kernel: str = "epanechnikov"
    grid: BandwidthGrid = field(default_factory=default_grid)
    fixed_bandwidth: float | None = None
    alpha: float = 0.05
    eps_trim: float = 0.01
    seed: int = 0
    distance_source: str = "pseudo"
    alphas: np.ndarray | None = None
    true_p: np.ndarray | None = None
    self_donors: bool = True

    def fold_count(self, n: int) -> int:
        f = self.folds
        if isinstance(f, str):
            key = f.strip().lower()
            if key == "none":
                return 1
            if key == "loo":
                return n
            try:
                f = int(key)
            except ValueError:
                raise ConfigError(
                    f"folds must be an integer, 'loo', or 'none'; got {f!r}"
                ) from None
        if not 1 <= f <= n:
            raise ConfigError(f"fold count must satisfy 1 <= k <= {n}, got {f}")
        return int(f)

    def check(self) -> None:
        problems = []
        if not 0.0 < self.alpha < 1.0:
            problems.append(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 <= self.eps_trim < 0.5:
            problems.append(f"trim must be in [0, 0.5), got {self.eps_trim}")
        if self.fixed_bandwidth is not None and not self.fixed_bandwidth > 0:
            problems.append(f"fixed bandwidth must be positive, got {self.fixed_bandwidth}")
        if self.distance_source not in ("pseudo", "oracle_l2"):
            problems.append(f"unknown distance source {self.distance_source!r}")
        if self.distance_source == "oracle_l2" and self.alphas is None:
            problems.append("oracle_l2 distances require alphas")
        if problems:
            raise ConfigError("; ".join(problems))


def score_vector(slice_: PeriodSlice, imp: ImputationSet) -> np.ndarray:
    """Per-unit doubly robust ATT scores; preconditions as in ``dr_att``."""
    _require_estimable(imp)
    y, w, p, mu0 = slice_.y, slice_.w, imp.phat, imp.mu0
    return y * w - ((1.0 - w) * y * p + (w - p) * mu0) / (1.0 - p)


def cf_score_vector(slice_: PeriodSlice, imp: ImputationSet) -> np.ndarray:
    """Per-unit doubly robust scores for the treated group's untreated mean.

    These are the correction terms of the ATT score, so the two decompose
    the treated outcome: y_i w_i = att score + this score, unit by unit.
    """
    _require_estimable(imp)
    y, w, p, mu0 = slice_.y, slice_.w, imp.phat, imp.mu0
    return ((1.0 - w) * y * p + (w - p) * mu0) / (1.0 - p)


def _require_estimable(imp: ImputationSet) -> None:
    if not imp.feasible_mu0.all():
        bad = np.nonzero(~imp.feasible_mu0)[0][:8].tolist()
        raise EstimationError(
            f"infeasible untreated-mean imputation for units {bad} at h={imp.h}",
            stage="estimate",
        )
    if not imp.feasible_p.all():
        bad = np.nonzero(~imp.feasible_p)[0][:8].tolist()
        raise EstimationError(
            f"infeasible propensity for units {bad} at h={imp.h}", stage="estimate"
        )
    if np.any(imp.phat >= 1.0):
        bad = np.nonzero(imp.phat >= 1.0)[0][:8].tolist()
        raise EstimationError(
            f"propensity of 1 survived trimming for units {bad}", stage="estimate"
        )


def _score_summary(scores: np.ndarray, n1: int, alpha: float) -> tuple[float, float, float]:
    n = scores.shape[0]
    point = float(scores.sum() / n1)
    centered = scores - (n1 / n) * point
    variance = float(n / n1**2 * (centered @ centered))
    half = norm_quantile(1.0 - alpha / 2.0) * np.sqrt(variance / n)
    return point, variance, float(half)


def dr_att(slice_: PeriodSlice, imp: ImputationSet, alpha: float = 0.05) -> AttEstimate:
    """Doubly robust ATT point estimate, variance, and confidence interval.

    Requires a feasible untreated mean and propensity for every unit and
    at least one treated unit in the slice.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    att, variance, half = _score_summary(score_vector(slice_, imp), slice_.n1, alpha)
    return AttEstimate(
        att=att,
        variance=variance,
        ci_low=att - half,
        ci_high=att + half,
        alpha=alpha,
        h_used=imp.h,
        n1=slice_.n1,
        n=slice_.y.shape[0],
        diagnostics=Diagnostics(n_clipped=imp.n_clipped),
    )


def dr_counterfactual_mean(
    slice_: PeriodSlice, imp: ImputationSet, alpha: float = 0.05
) -> CfMeanEstimate:
    """Doubly robust estimate of the treated group's untreated outcome mean.

    The variance applies the same centered-score form as the ATT variance
    to the counterfactual-mean scores, so the interval reflects the
    sampling noise of this estimand rather than of the ATT.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    value, variance, half = _score_summary(cf_score_vector(slice_, imp), slice_.n1, alpha)
    return CfMeanEstimate(
        value=value,
        variance=variance,
        ci_low=value - half,
        ci_high=value + half,
        alpha=alpha,
        h_used=imp.h,
        n1=slice_.n1,
        n=slice_.y.shape[0],
        diagnostics=Diagnostics(n_clipped=imp.n_clipped),
    )


def counterfactual_mean(slice_: PeriodSlice, est: AttEstimate) -> float:
    """Mean untreated potential outcome of the treated group.

    Equals the treated-group outcome mean minus the ATT estimate.
    Shifting (and flipping) the ATT interval around the treated mean
    yields an interval of identical width; ``dr_counterfactual_mean``
    instead builds one from this estimand's own scores.
    """
    treated_mean = float(slice_.y[slice_.w == 1.0].mean())
    return treated_mean - est.att


@contextlib.contextmanager
def _stage(name):
    try:
        yield
    except LatentPanelError as err:
        if err.stage is None:
            err.stage = name
        raise


def _estimation_feasible(imp_cv: ImputationSet, slice_: PeriodSlice, self_final: bool) -> bool:
    if self_final:
        # Own observations repair control mu0 and every propensity
        # denominator, so only treated units' mu0 can still fail.
        treated = slice_.w == 1.0
        return bool(imp_cv.feasible_mu0[treated].all())
    return bool(imp_cv.feasible_mu0.all() and imp_cv.feasible_p.all())


def _pipeline(panel: Panel, t: int, config: EstimatorConfig):
    config.check()
    with _stage("validate"):
        violations = validate(panel)
        if violations:
            more = f" (+{len(violations) - 1} more)" if len(violations) > 1 else ""
            raise DataError(
                f"panel inadmissible: {violations[0].message}{more}",
                stage="validate",
            )
    with _stage("slice"):
        slc = slice_period(panel, t)
    with _stage("folds"):
        plan = partition(panel.n, config.fold_count(panel.n), config.seed)
    with _stage("distances"):
        if config.distance_source == "oracle_l2":
            dist = oracle_l2_distances(config.alphas, plan)
        else:
            dist = pseudo_distances(panel, plan)
    kern = KernelSpec(config.kernel)
    self_final = config.self_donors and plan.mode == FoldMode.NONE

    def held_out(h: float) -> ImputationSet:
        imp = impute(dist, slc, kern, h, config.eps_trim, include_self=False)
        if config.true_p is not None:
            imp = imp.with_propensity(config.true_p, config.eps_trim)
        return imp

    def final(h: float, imp_cv: ImputationSet) -> ImputationSet:
        if not self_final:
            return imp_cv
        imp = impute(dist, slc, kern, h, config.eps_trim, include_self=True)
        if config.true_p is not None:
            imp = imp.with_propensity(config.true_p, config.eps_trim)
        return imp

    with _stage("bandwidth"):
        if config.fixed_bandwidth is not None:
            h_star = float(config.fixed_bandwidth)
            imp_cv = held_out(h_star)
            report = CvReport(
                grid=BandwidthGrid((h_star,)),
                errors=(cv_error(slc, imp_cv),),
                h_cv=h_star,
                rule="fixed",
            )
            substituted = False
        else:
            cvs, imps, feas = [], [], []
            for h in config.grid.candidates:
                imp_cv = held_out(h)
                cvs.append(cv_error(slc, imp_cv))
                feas.append(_estimation_feasible(imp_cv, slc, self_final))
                imps.append(imp_cv)
            report = select(config.grid, cvs)
            order = sorted(
                (e, i) for i, e in enumerate(cvs) if e != INFEASIBLE and feas[i]
            )
            if not order:
                raise InfeasibleBandwidthError(
                    "no bandwidth candidate allowed estimation for all units; "
                    "widen the grid",
                    stage="bandwidth",
                )
            h_star = config.grid.candidates[order[0][1]]
            substituted = h_star != report.h_cv
            imp_cv = imps[order[0][1]]
    with _stage("estimate"):
        imp_final = final(h_star, imp_cv)
    diags = Diagnostics(
        n_clipped=imp_final.n_clipped,
        skipped_bandwidths=report.skipped,
        substituted_h=substituted,
        fold_seed=config.seed,
        fold_mode=plan.mode,
        selection_rule=report.rule,
    )
    return slc, imp_final, diags


def estimate_period(panel: Panel, t: int, config: EstimatorConfig) -> AttEstimate:
    """Run the full cross-fitted pipeline for one post-treatment period.

    Steps: validate the panel, partition units into folds, compute
    cross-fitted distances, impute mu0/mu1/propensity per bandwidth
    candidate, select the bandwidth by least-squares CV, and form the
    doubly robust ATT estimate with its variance and interval.
    Deterministic given (panel, t, config).
    """
    slc, imp_final, diags = _pipeline(panel, t, config)
    with _stage("estimate"):
        est = dr_att(slc, imp_final, config.alpha)
    return replace(est, diagnostics=diags)


def estimate_cf_mean(panel: Panel, t: int, config: EstimatorConfig) -> CfMeanEstimate:
    """Same pipeline as ``estimate_period`` targeting the counterfactual mean."""
    slc, imp_final, diags = _pipeline(panel, t, config)
    with _stage("estimate"):
        est = dr_counterfactual_mean(slc, imp_final, config.alpha)
    return replace(est, diagnostics=diags)
