"""Tests for the energy test, the logistic LRT, and the type-I study runner."""

import math
from functools import partial
from itertools import combinations

import numpy as np
import pytest

from cptest import rng as crng
from cptest.baselines import (Type1StudyConfig, drop_collinear,
                              energy_statistic, energy_test, lrt_logistic,
                              run_type1_study)
from cptest.dataset import INTERACTIONS, Dataset
from cptest.registry import BoundTest, resolve_test
from cptest.sim import mvn_shift_dataset


def _boom(r):
    raise RuntimeError("boom")


def _naive_energy(X, Y):
    """Straight-from-the-formula loops, independent of the library path."""
    l, m = len(X), len(Y)
    between = sum(math.dist(a, b) for a in X for b in Y)
    wx = sum(math.dist(a, b) for a in X for b in X)
    wy = sum(math.dist(a, b) for a in Y for b in Y)
    return (l * m / (l + m)) * (2 * between / (l * m) - wx / l ** 2 - wy / m ** 2)


class TestEnergyStatistic:
    def test_identical_multisets_give_zero(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(6, 3))
        assert energy_statistic(X, X.copy()) == pytest.approx(0.0, abs=1e-12)

    def test_point_masses_grow_linearly_in_separation(self):
        X = np.zeros((3, 1))
        e1 = energy_statistic(X, np.full((5, 1), 1.0))
        e2 = energy_statistic(X, np.full((5, 1), 2.0))
        e4 = energy_statistic(X, np.full((5, 1), 4.0))
        assert e1 == pytest.approx((3 * 5 / 8) * 2.0)
        assert e2 / e1 == pytest.approx(2.0)
        assert e4 / e1 == pytest.approx(4.0)

    def test_matches_naive_formula(self):
        rng = np.random.default_rng(2)
        for trial in range(10):
            X = rng.normal(size=(rng.integers(2, 7), 3))
            Y = rng.normal(size=(rng.integers(2, 7), 3))
            assert energy_statistic(X, Y) == pytest.approx(
                _naive_energy(X.tolist(), Y.tolist()), rel=1e-10)

    def test_nonnegative_on_random_inputs(self):
        rng = np.random.default_rng(3)
        for trial in range(50):
            X = rng.normal(size=(rng.integers(2, 9), rng.integers(1, 4)))
            Y = rng.normal(size=(rng.integers(2, 9), X.shape[1]))
            assert energy_statistic(X, Y) >= -1e-10


class TestEnergyTest:
    def test_identical_rows_give_p_one(self):
        X = np.tile(np.arange(4.0)[:, None], (2, 1))
        d = Dataset(X, [1] * 4 + [0] * 4, ("x",))
        r = energy_test(d, B=49, seed=0)
        assert r.observed == pytest.approx(0.0, abs=1e-12)
        assert r.p_value == 1.0

    def test_matches_exhaustive_enumeration(self):
        # independent oracle: every C(8, 4) assignment, naive statistic
        rng = np.random.default_rng(4)
        X = np.vstack([rng.normal(1.5, 1.0, (4, 2)),
                       rng.normal(-1.5, 1.0, (4, 2))])
        t = np.array([1, 1, 1, 1, 0, 0, 0, 0])
        obs = _naive_energy(X[t == 1].tolist(), X[t == 0].tolist())
        count = total = 0
        for rows in combinations(range(8), 4):
            mask = np.zeros(8, dtype=bool)
            mask[list(rows)] = True
            e = _naive_energy(X[mask].tolist(), X[~mask].tolist())
            count += e >= obs - 1e-12
            total += 1
        p_exact = count / total
        d = Dataset(X, t, ("a", "b"))
        p_mc = energy_test(d, B=8000, seed=11).p_value
        assert abs(p_mc - p_exact) <= 0.02

    def test_needs_four_rows(self):
        d = Dataset([[1.0], [2.0], [3.0]], [1, 0, 0], ("x",))
        with pytest.raises(ValueError, match="at least 4"):
            energy_test(d, B=19, seed=0)

    def test_worker_invariance(self):
        rng = np.random.default_rng(5)
        d = Dataset(rng.normal(size=(12, 2)), [1] * 6 + [0] * 6, ("a", "b"))
        r1 = energy_test(d, B=200, seed=9, workers=1)
        r2 = energy_test(d, B=200, seed=9, workers=2)
        assert r1.p_value == r2.p_value
        np.testing.assert_array_equal(r1.null_draws, r2.null_draws)

    def test_type_one_error_controlled_on_null_data(self):
        gen = partial(mvn_shift_dataset, 0.0, 10, 10, 3)
        cfg = Type1StudyConfig(
            generator=gen, test=BoundTest(resolve_test("energy"), 59),
            replications=150, alpha_grid=(0.05, 0.1), seed=21)
        study = run_type1_study(cfg, workers=2)
        for alpha, rate, se, reps in study.rows:
            assert rate <= alpha + 3 * math.sqrt(alpha * (1 - alpha) / reps)


class TestDropCollinear:
    def test_keeps_independent_columns(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(20, 4))
        np.testing.assert_array_equal(drop_collinear(X), [0, 1, 2, 3])

    def test_drops_duplicate_column(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(20, 1))
        X = np.hstack([x, x, rng.normal(size=(20, 1))])
        assert len(drop_collinear(X)) == 2

    def test_drops_constant_column(self):
        rng = np.random.default_rng(8)
        X = np.hstack([np.ones((20, 1)), rng.normal(size=(20, 2))])
        keep = drop_collinear(X)
        assert 0 not in keep and len(keep) == 2


class TestLrt:
    def test_null_pvalues_approximately_uniform(self):
        # moderate n, main effects: Wilks' theorem gives uniform p-values
        ps = []
        for rep in range(500):
            d = mvn_shift_dataset(0.0, 100, 100, 3, crng.stream(42, rep))
            ps.append(lrt_logistic(d).p_value)
        ps = np.sort(ps)
        ks = np.max(np.abs(ps - np.arange(1, 501) / 500))
        assert ks < 0.08

    def test_zero_column_reduces_df(self):
        rng = np.random.default_rng(9)
        X = np.hstack([rng.normal(size=(30, 2)), np.zeros((30, 1))])
        d = Dataset(X, [1] * 15 + [0] * 15, ("a", "b", "c"))
        res = lrt_logistic(d)
        assert res.dropped == 1
        assert res.df == 2

    def test_statistic_nonnegative(self):
        rng = np.random.default_rng(10)
        for rep in range(20):
            d = mvn_shift_dataset(0.0, 20, 20, 3, crng.stream(55, rep))
            assert lrt_logistic(d).statistic >= -1e-6

    def test_overfit_design_inflates_type_one(self):
        # n = 120 with a 78-column interaction design over-rejects badly
        rej = 0
        reps = 60
        for rep in range(reps):
            d = mvn_shift_dataset(0.0, 60, 60, 12, crng.stream(99, rep))
            rej += lrt_logistic(d, INTERACTIONS).p_value <= 0.05
        assert rej / reps >= 0.2

    def test_all_constant_design_gives_p_one(self):
        d = Dataset(np.ones((10, 2)), [1] * 5 + [0] * 5, ("a", "b"))
        res = lrt_logistic(d)
        assert res.p_value == 1.0
        assert res.df == 0


class TestType1Study:
    def test_exact_test_controls_size(self):
        # exact p-values are uniform on {k / C(8,4)}: rejection at alpha
        # is at most alpha, up to Monte Carlo error
        gen = partial(mvn_shift_dataset, 0.0, 4, 4, 2)
        cfg = Type1StudyConfig(
            generator=gen, test=BoundTest(resolve_test("exact-knn:k=3"), 19),
            replications=200, alpha_grid=(0.05, 0.1), seed=3)
        study = run_type1_study(cfg)
        for alpha, rate, se, reps in study.rows:
            assert rate <= alpha + 3 * math.sqrt(alpha * (1 - alpha) / reps)
        assert study.p_values.shape == (200,)

    def test_rows_match_pvalues(self):
        gen = partial(mvn_shift_dataset, 0.0, 5, 5, 2)
        cfg = Type1StudyConfig(
            generator=gen, test=BoundTest(resolve_test("lrt-main"), 19),
            replications=120, alpha_grid=(0.5,), seed=8)
        study = run_type1_study(cfg, workers=2)
        alpha, rate, se, reps = study.rows[0]
        assert rate == pytest.approx(np.mean(study.p_values <= 0.5))
        assert se == pytest.approx(math.sqrt(rate * (1 - rate) / 120))

    def test_replication_floor_enforced(self):
        with pytest.raises(ValueError, match="100"):
            Type1StudyConfig(generator=lambda r: None, test=lambda d, s: 1.0,
                             replications=50)

    def test_worker_invariance(self):
        gen = partial(mvn_shift_dataset, 0.0, 6, 6, 2)
        cfg = Type1StudyConfig(
            generator=gen, test=BoundTest(resolve_test("cpt-logistic"), 29),
            replications=100, seed=4)
        a = run_type1_study(cfg, workers=1)
        b = run_type1_study(cfg, workers=2)
        np.testing.assert_array_equal(a.p_values, b.p_values)

    def test_generator_errors_carry_replication_index(self):
        cfg = Type1StudyConfig(generator=_boom,
                               test=BoundTest(resolve_test("lrt-main"), 19),
                               replications=100, seed=0)
        with pytest.raises(RuntimeError, match="replication 0"):
            run_type1_study(cfg)
