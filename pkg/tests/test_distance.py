import numpy as np
import pytest

from latentpanel import (
    HAVE_COMPILED,
    DataError,
    DgpSpec,
    Panel,
    ShapeError,
    generate,
    gram,
    oracle_l2_distances,
    partition,
    pseudo_distances,
)
from latentpanel.distance import _all_pairs_numpy, _fold_block_numpy

from _oracles import naive_gram, naive_pseudo_distances
from conftest import random_panel


def panel_from_pre(rows, extra_periods=1, treated_last=1):
    rows = np.asarray(rows, dtype=float)
    n, t0 = rows.shape
    y = np.hstack([rows, np.zeros((n, extra_periods))])
    w = np.zeros((n, t0 + extra_periods), dtype=np.int8)
    w[:treated_last, -1] = 1
    return Panel(y, w, t0)


class TestGram:
    def test_tiny_closed_form(self):
        panel = panel_from_pre([[1, 1], [2, 2]])
        assert np.array_equal(gram(panel), np.array([[1.0, 2.0], [2.0, 4.0]]))

    def test_exactly_symmetric(self, rng):
        panel = random_panel(rng, n=11, t=7, t0=5)
        g = gram(panel)
        assert np.array_equal(g, g.T)

    def test_matches_naive_double_loop(self, rng):
        panel = random_panel(rng, n=10, t=6, t0=5)
        assert np.max(np.abs(gram(panel) - naive_gram(panel))) <= 1e-12

    def test_diagonal_is_scaled_squared_norm(self, rng):
        panel = random_panel(rng, n=6, t=5, t0=3)
        g = gram(panel)
        pre = panel.pre_outcomes()
        for i in range(6):
            assert g[i, i] == pytest.approx((pre[i] @ pre[i]) / 3, abs=1e-14)


class TestPseudoDistances:
    def test_identical_histories_give_zero(self):
        panel = panel_from_pre([[1, 2, 3], [1, 2, 3], [0, 1, 0], [4, 4, 4]])
        dist = pseudo_distances(panel, partition(4, 1, seed=0))
        assert dist.values[0, 1] == 0.0
        assert dist.values[1, 0] == 0.0

    def test_four_unit_enumeration(self):
        # probes for the (0, 1) pair are units 2 and 3; inner products
        # (1/2)|<(1,1),(1,-1)>| = 0 and (1/2)|<(2,1),(1,-1)>| = 0.5
        panel = panel_from_pre([[1, 0], [0, 1], [1, 1], [2, 1]])
        dist = pseudo_distances(panel, partition(4, 1, seed=0))
        assert dist.values[0, 1] == pytest.approx(0.5, abs=1e-15)

    def test_matches_literal_loop_two_fold(self, rng):
        panel = random_panel(rng, n=12, t=7, t0=6)
        plan = partition(12, 2, seed=5)
        dist = pseudo_distances(panel, plan)
        ref = naive_pseudo_distances(panel, plan)
        mask = dist.computed
        assert np.nanmax(np.abs(dist.values[mask] - ref[mask])) <= 1e-12
        assert np.all(np.isnan(dist.values[~mask]))

    def test_matches_literal_loop_global(self, rng):
        panel = random_panel(rng, n=9, t=5, t0=4)
        for k in (1, 9):
            plan = partition(9, k, seed=2)
            dist = pseudo_distances(panel, plan)
            ref = naive_pseudo_distances(panel, plan)
            assert np.nanmax(np.abs(dist.values[dist.computed] - ref[dist.computed])) <= 1e-12

    def test_symmetric_under_no_crossfit(self, rng):
        panel = random_panel(rng, n=8, t=6, t0=4)
        dist = pseudo_distances(panel, partition(8, 1, seed=0))
        off = ~np.eye(8, dtype=bool)
        assert np.array_equal(dist.values[off], dist.values.T[off])

    def test_computed_entries_nonnegative_finite(self, rng):
        for k in (1, 3, 10):
            panel = random_panel(rng, n=10, t=6, t0=4)
            dist = pseudo_distances(panel, partition(10, k, seed=2))
            vals = dist.values[dist.computed]
            assert np.all(np.isfinite(vals)) and np.all(vals >= 0.0)

    def test_scale_covariance(self, rng):
        panel = random_panel(rng, n=8, t=5, t0=4)
        c = 1.7
        scaled = Panel(
            np.hstack([c * panel.pre_outcomes(), panel.outcomes[:, 4:]]),
            panel.treatment,
            panel.t0,
        )
        plan = partition(8, 1, seed=0)
        d1 = pseudo_distances(panel, plan).values
        d2 = pseudo_distances(scaled, plan).values
        mask = ~np.eye(8, dtype=bool)
        assert np.allclose(d2[mask], c**2 * d1[mask], rtol=1e-10, atol=1e-12)

    def test_permutation_equivariance(self, rng):
        panel = random_panel(rng, n=7, t=5, t0=3)
        perm = rng.permutation(7)
        permuted = Panel(panel.outcomes[perm], panel.treatment[perm], panel.t0)
        plan = partition(7, 1, seed=0)
        d = pseudo_distances(panel, plan).values
        dp = pseudo_distances(permuted, plan).values
        mask = ~np.eye(7, dtype=bool)
        assert np.allclose(dp[mask], d[np.ix_(perm, perm)][mask], rtol=0, atol=1e-14)

    def test_complement_too_small(self, rng):
        panel = random_panel(rng, n=4, t=4, t0=2)
        plan = partition(4, 2, seed=0)  # complements have 2 < 3 units
        with pytest.raises(DataError, match="complement"):
            pseudo_distances(panel, plan)

    def test_plan_size_mismatch(self, rng):
        panel = random_panel(rng, n=6, t=4, t0=2)
        with pytest.raises(ShapeError):
            pseudo_distances(panel, partition(7, 1, seed=0))

    def test_estimation_consistency_in_pre_period_length(self):
        # interactive-factor population distance is |a_i - a_j| * E[l^2]
        pooled = {50: [], 1000: []}
        for t0 in pooled:
            for r in range(3):
                sp = generate(DgpSpec(model=2, n=60, t0=t0, seed=100 + r))
                plan = partition(60, 1, seed=0)
                dist = pseudo_distances(sp.panel, plan)
                diff = np.abs(sp.alphas[:, None] - sp.alphas[None, :]) / 3.0
                mask = dist.computed
                pooled[t0].extend(np.abs(dist.values[mask] - diff[mask]).tolist())
        assert np.median(pooled[1000]) < np.median(pooled[50])


class TestBackends:
    def test_numpy_paths_match_each_other(self, rng):
        panel = random_panel(rng, n=10, t=6, t0=5)
        for k in (1, 3, 10):
            plan = partition(10, k, seed=1)
            d_py = pseudo_distances(panel, plan, backend="python")
            ref = naive_pseudo_distances(panel, plan)
            m = d_py.computed
            assert np.nanmax(np.abs(d_py.values[m] - ref[m])) <= 1e-12

    @pytest.mark.skipif(not HAVE_COMPILED, reason="compiled extension unavailable")
    def test_compiled_matches_numpy_bitwise(self, rng):
        for _ in range(10):
            panel = random_panel(rng, n=13, t=7, t0=6)
            for k in (1, 4, 13):
                plan = partition(13, k, seed=int(rng.integers(1 << 30)))
                fast = pseudo_distances(panel, plan, backend="compiled")
                slow = pseudo_distances(panel, plan, backend="python")
                assert np.array_equal(fast.computed, slow.computed)
                m = fast.computed
                assert np.array_equal(fast.values[m], slow.values[m])

    def test_chunking_boundaries(self, rng):
        g = rng.normal(size=(67, 67))
        g = np.tril(g) + np.tril(g, -1).T
        for chunk in (1, 7, 67, 100):
            assert np.array_equal(_all_pairs_numpy(g, chunk=chunk), _all_pairs_numpy(g))
        targets = np.arange(0, 30, dtype=np.intp)
        donors_ = np.arange(30, 67, dtype=np.intp)
        for chunk in (1, 11, 64):
            assert np.array_equal(
                _fold_block_numpy(g, targets, donors_, chunk=chunk),
                _fold_block_numpy(g, targets, donors_),
            )


class TestOracleL2:
    def test_identity_and_scalars(self):
        plan = partition(3, 1, seed=0)
        d = oracle_l2_distances(np.array([0.0, 3.0, 0.0]), plan)
        assert d.values[0, 2] == 0.0
        assert d.values[0, 1] == 3.0

    def test_pythagorean(self):
        plan = partition(3, 1, seed=0)
        alphas = np.array([[1.0, 2.0], [4.0, 6.0], [0.0, 0.0]])
        d = oracle_l2_distances(alphas, plan)
        assert d.values[0, 1] == 5.0

    def test_fold_mask(self):
        plan = partition(6, 2, seed=4)
        d = oracle_l2_distances(np.arange(6.0), plan)
        for i in range(6):
            for j in range(6):
                expected = plan.assignment[i] != plan.assignment[j]
                assert d.computed[i, j] == expected

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            oracle_l2_distances(np.zeros(4), partition(5, 1, seed=0))
