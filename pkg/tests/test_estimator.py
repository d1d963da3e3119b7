import numpy as np
import pytest

from latentpanel import (
    BandwidthGrid,
    ConfigError,
    EstimationError,
    EstimatorConfig,
    KernelSpec,
    Panel,
    counterfactual_mean,
    dr_att,
    dr_counterfactual_mean,
    estimate_cf_mean,
    estimate_period,
    score_vector,
    slice_period,
)
from latentpanel._stats import norm_quantile
from latentpanel.impute import ImputationSet
from latentpanel.panel import PeriodSlice

from _oracles import naive_att_variance, naive_cf_mean
from conftest import random_panel

Z975 = 1.959964


def imputation(mu0, phat, mu1=None):
    n = len(mu0)
    ones = np.ones(n, dtype=bool)
    return ImputationSet(
        mu0=np.asarray(mu0, float),
        mu1=np.zeros(n) if mu1 is None else np.asarray(mu1, float),
        phat=np.asarray(phat, float),
        h=0.7,
        feasible_mu0=ones.copy(),
        feasible_mu1=ones.copy(),
        feasible_p=ones.copy(),
        n_clipped=0,
    )


def make_slice(y, w):
    y = np.asarray(y, float)
    w = np.asarray(w, float)
    return PeriodSlice(t=2, y=y, w=w, n1=int(w.sum()))


class TestDrAtt:
    def test_zero_propensity_reduces_to_treated_residual_mean(self):
        slc = make_slice([3.0, 5.0, 1.0, 2.0], [1, 1, 0, 0])
        imp = imputation([1.0, 2.0, 9.0, 9.0], [0.0] * 4)
        est = dr_att(slc, imp)
        assert est.att == pytest.approx(((3 - 1) + (5 - 2)) / 2, abs=1e-14)

    def test_equal_scores_give_zero_variance(self):
        # both treated scores are 2, both control scores are 2 as well:
        # y=0 controls with mu0 chosen so -p(y-mu0)/(1-p) = 2
        slc = make_slice([3.0, 3.0, 0.0, 0.0], [1, 1, 0, 0])
        imp = imputation([1.0, 1.0, 2.0, 2.0], [0.5] * 4)
        est = dr_att(slc, imp)
        assert est.variance == pytest.approx(0.0, abs=1e-14)
        assert est.ci_low == est.ci_high == est.att

    def test_direct_formula_substitution(self):
        slc = make_slice([3.0, 5.0, 1.0, 2.0], [1, 1, 0, 0])
        imp = imputation([1.0, 2.0, 1.0, 2.0], [0.5] * 4)
        est = dr_att(slc, imp, alpha=0.05)
        att, vhat, psi = naive_att_variance([3, 5, 1, 2], [1, 1, 0, 0], [1, 2, 1, 2], [0.5] * 4)
        assert psi == [2.0, 3.0, 0.0, 0.0]
        assert est.att == pytest.approx(att, abs=1e-14)
        assert est.variance == pytest.approx(vhat, abs=1e-14)
        half = Z975 * np.sqrt(vhat / 4)
        assert est.ci_high - est.ci_low == pytest.approx(2 * half, rel=1e-6)

    def test_score_identity_random(self, rng):
        for _ in range(200):
            n = int(rng.integers(3, 12))
            w = np.zeros(n)
            w[: max(1, int(rng.integers(1, n)))] = 1
            rng.shuffle(w)
            if w.sum() in (0, n):
                continue
            slc = make_slice(rng.normal(size=n), w)
            imp = imputation(rng.normal(size=n), rng.uniform(0.05, 0.9, size=n))
            est = dr_att(slc, imp)
            psi = score_vector(slc, imp)
            n1 = slc.n1
            assert est.att == pytest.approx(psi.sum() / n1, rel=1e-12)
            recomputed = (n / n1**2) * np.sum((psi - (n1 / n) * est.att) ** 2)
            assert est.variance == pytest.approx(recomputed, rel=1e-12)

    def test_infeasible_units_named(self):
        slc = make_slice([1.0, 2.0, 3.0], [1, 0, 0])
        imp = imputation([1.0, 1.0, 1.0], [0.5] * 3)
        broken = ImputationSet(
            mu0=imp.mu0,
            mu1=imp.mu1,
            phat=imp.phat,
            h=1.0,
            feasible_mu0=np.array([False, True, True]),
            feasible_mu1=imp.feasible_mu1,
            feasible_p=imp.feasible_p,
            n_clipped=0,
        )
        with pytest.raises(EstimationError, match=r"\[0\]"):
            dr_att(slc, broken)

    def test_unit_propensity_rejected(self):
        slc = make_slice([1.0, 2.0, 3.0], [1, 0, 0])
        imp = imputation([1.0, 1.0, 1.0], [0.5, 1.0, 0.5])
        with pytest.raises(EstimationError, match="trimming"):
            dr_att(slc, imp)

    def test_alpha_domain(self):
        slc = make_slice([1.0, 2.0], [1, 0])
        with pytest.raises(ConfigError):
            dr_att(slc, imputation([0.0, 0.0], [0.2, 0.2]), alpha=1.5)


class TestCounterfactualMean:
    def test_zero_att_gives_treated_mean(self):
        slc = make_slice([4.0, 6.0, 0.0], [1, 1, 0])
        imp = imputation([5.0, 5.0, 0.0], [0.0, 0.0, 0.0])
        est = dr_att(slc, imp)
        shifted = counterfactual_mean(slc, est)
        assert shifted == pytest.approx(5.0 - est.att)

    def test_subtraction(self):
        slc = make_slice([4.0, 4.0, 1.0], [1, 1, 0])
        est = dr_att(slc, imputation([2.5, 2.5, 1.0], [0.0] * 3))
        assert counterfactual_mean(slc, est) == pytest.approx(4.0 - est.att)

    def test_matches_direct_dr_form_on_toy(self, rng):
        y = rng.normal(size=6)
        w = np.array([1.0, 0.0, 1.0, 0.0, 0.0, 1.0])
        slc = make_slice(y, w)
        mu0 = rng.normal(size=6)
        phat = rng.uniform(0.1, 0.8, size=6)
        imp = imputation(mu0, phat)
        est = dr_att(slc, imp)
        direct = naive_cf_mean(y, w, mu0, phat)
        assert counterfactual_mean(slc, est) == pytest.approx(direct, rel=1e-12)
        assert dr_counterfactual_mean(slc, imp).value == pytest.approx(direct, rel=1e-12)

    def test_cf_interval_uses_own_scores(self, rng):
        y = rng.normal(size=8)
        w = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
        slc = make_slice(y, w)
        imp = imputation(rng.normal(size=8), rng.uniform(0.2, 0.7, size=8))
        cf = dr_counterfactual_mean(slc, imp)
        phi = slc.y * slc.w - score_vector(slc, imp)
        n, n1 = 8, slc.n1
        var = (n / n1**2) * np.sum((phi - (n1 / n) * cf.value) ** 2)
        assert cf.variance == pytest.approx(var, rel=1e-12)


def duplicated_alpha_panel(n_groups=10, per_group=4, t0=40, tau=0.5, seed=0):
    """Additive noiseless panel whose unit factors repeat within groups."""
    rng = np.random.default_rng(seed)
    alphas = np.repeat(rng.uniform(-1, 1, size=n_groups), per_group)
    lams = rng.uniform(-1, 1, size=t0 + 1)
    n = n_groups * per_group
    y = alphas[:, None] + lams[None, :]
    w = np.zeros((n, t0 + 1), dtype=np.int8)
    treated = np.arange(0, n, per_group)  # one treated twin per group
    w[treated, -1] = 1
    y[:, -1] += tau * w[:, -1]
    return Panel(y, w, t0), alphas


class TestEstimatePeriod:
    def test_noiseless_additive_with_oracle_distance(self):
        panel, alphas = duplicated_alpha_panel()
        config = EstimatorConfig(
            folds="none",
            distance_source="oracle_l2",
            alphas=alphas,
            fixed_bandwidth=1e-9,
            seed=3,
            self_donors=False,
        )
        est = estimate_period(panel, panel.t, config)
        assert est.att == pytest.approx(0.5, abs=1e-6)

    def test_bit_identical_repeat(self, rng):
        panel = random_panel(rng, n=12, t=8, t0=6)
        config = EstimatorConfig(folds=2, seed=11, grid=BandwidthGrid.geometric(0.1, 4, 8))
        a = estimate_period(panel, panel.t, config)
        b = estimate_period(panel, panel.t, config)
        assert a == b

    def test_fold_modes_run_and_report(self, rng):
        panel = random_panel(rng, n=14, t=8, t0=6)
        for folds, mode in ((2, "kfold"), ("loo", "loo"), ("none", "none")):
            config = EstimatorConfig(folds=folds, seed=4)
            est = estimate_period(panel, panel.t, config)
            assert est.diagnostics.fold_mode == mode
            assert est.diagnostics.fold_seed == 4
            assert np.isfinite(est.att)

    def test_location_equivariance_fixed_h(self, rng):
        panel = random_panel(rng, n=12, t=7, t0=5)
        shifted = Panel(
            np.hstack(
                [panel.outcomes[:, :5], panel.outcomes[:, 5:] + 17.5]
            ),
            panel.treatment,
            panel.t0,
        )
        config = EstimatorConfig(folds="loo", fixed_bandwidth=2.5, seed=0)
        base = estimate_period(panel, panel.t, config)
        moved = estimate_period(shifted, panel.t, config)
        assert moved.att == pytest.approx(base.att, abs=1e-8)

    def test_inadmissible_panel_rejected(self):
        y = np.zeros((5, 4))
        w = np.zeros((5, 4), dtype=np.int8)
        w[0, 1] = 1  # treated before t0+1
        w[1, 3] = 1
        panel = Panel(y, w, 2)
        from latentpanel import DataError

        with pytest.raises(DataError, match="inadmissible"):
            estimate_period(panel, 4, EstimatorConfig())

    def test_cv_winner_substituted_when_estimation_infeasible(self):
        # two tight clusters: treated pair near zero, controls far away;
        # at the small candidate every own-group fit works but no treated
        # unit has a control donor, so estimation falls to the larger h
        alphas = np.array([0.0, 0.001, 5.0, 5.001, 5.002, 5.003])
        t0 = 6
        rngl = np.random.default_rng(1)
        lams = rngl.uniform(-1, 1, size=t0 + 1)
        y = alphas[:, None] + lams[None, :]
        w = np.zeros((6, t0 + 1), dtype=np.int8)
        w[0, -1] = w[1, -1] = 1
        panel = Panel(y, w, t0)
        config = EstimatorConfig(
            folds="none",
            self_donors=False,
            distance_source="oracle_l2",
            alphas=alphas,
            grid=BandwidthGrid((0.01, 50.0)),
            seed=0,
        )
        est = estimate_period(panel, panel.t, config)
        assert est.diagnostics.substituted_h
        assert est.h_used == 50.0

    def test_oracle_requires_alphas(self, rng):
        panel = random_panel(rng, n=8, t=5, t0=3)
        with pytest.raises(ConfigError, match="alphas"):
            estimate_period(panel, panel.t, EstimatorConfig(distance_source="oracle_l2"))

    def test_true_propensity_override(self, rng):
        panel = random_panel(rng, n=10, t=6, t0=4)
        p = np.full(10, 0.4)
        config = EstimatorConfig(folds="loo", true_p=p, seed=1)
        est = estimate_period(panel, panel.t, config)
        assert np.isfinite(est.att)

    def test_cf_mean_pipeline_agrees_with_shift(self, rng):
        panel = random_panel(rng, n=12, t=7, t0=5)
        config = EstimatorConfig(folds=2, seed=6)
        att = estimate_period(panel, panel.t, config)
        cf = estimate_cf_mean(panel, panel.t, config)
        slc = slice_period(panel, panel.t)
        treated_mean = slc.y[slc.w == 1.0].mean()
        assert cf.value == pytest.approx(treated_mean - att.att, rel=1e-10)
        assert cf.h_used == att.h_used

    def test_folds_parsing(self):
        config = EstimatorConfig(folds="3")
        assert config.fold_count(10) == 3
        assert EstimatorConfig(folds="loo").fold_count(7) == 7
        assert EstimatorConfig(folds="none").fold_count(7) == 1
        with pytest.raises(ConfigError):
            EstimatorConfig(folds="seven").fold_count(7)
        with pytest.raises(ConfigError):
            EstimatorConfig(folds=9).fold_count(7)


def test_norm_quantile_reference_values():
    assert norm_quantile(0.975) == pytest.approx(1.959964, abs=5e-7)
    assert norm_quantile(0.5) == 0.0
    assert norm_quantile(0.9) == pytest.approx(1.2815515655446004, abs=1e-9)
    assert norm_quantile(0.025) == pytest.approx(-1.9599639845400545, abs=1e-9)
    assert norm_quantile(1e-9) == pytest.approx(-5.997807014855852, abs=1e-6)
    with pytest.raises(ValueError):
        norm_quantile(0.0)
