"""Tests for the accuracy statistics, with brute-force partition oracles."""

from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from cptest import rng as crng
from cptest.classifiers import classify_rows, parse_classifier, train
from cptest.dataset import Dataset
from cptest.stats import (StatSpec, resolve_kappa, stat_in_sample,
                          stat_out_sample)


def _oracle_out_sample(cspec, d, kappa):
    """Independent enumeration of every held-out subset pair, computed
    directly from train/classify rather than through stat_out_sample."""
    treated = d.treated_indices()
    control = d.control_indices()
    values = []
    for ht in combinations(treated.tolist(), kappa):
        for hc in combinations(control.tolist(), kappa):
            held = np.array(ht + hc)
            mask = np.ones(d.n, dtype=bool)
            mask[held] = False
            model = train(cspec, d.covariates[mask], d.treatment[mask], 0)
            preds = classify_rows(model, d.covariates[held])
            values.append(np.mean(preds == d.treatment[held]))
    return float(np.mean(values))


class TestInSample:
    def test_knn1_distinct_rows_is_exactly_one(self):
        rng = np.random.default_rng(0)
        d = Dataset(rng.normal(size=(10, 2)), [1] * 5 + [0] * 5, ("a", "b"))
        assert stat_in_sample(parse_classifier("knn:k=1"), d, 1) == 1.0

    def test_constant_covariates_balanced_logistic_is_half(self):
        d = Dataset(np.ones((8, 2)), [1] * 4 + [0] * 4, ("a", "b"))
        # zero-information design: all weights stay 0, ties classify to 0,
        # so exactly the control half is correct
        assert stat_in_sample(parse_classifier("logistic"), d, 1) == 0.5

    def test_separable_1d_logistic_is_one(self):
        d = Dataset([[1.0], [2.0], [-1.0], [-2.0]], [1, 1, 0, 0], ("x",))
        assert stat_in_sample(parse_classifier("logistic"), d, 1) == 1.0

    def test_value_is_multiple_of_one_over_n(self):
        rng = np.random.default_rng(5)
        for trial in range(10):
            n = int(rng.integers(4, 30)) * 2
            d = Dataset(rng.normal(size=(n, 2)),
                        [1] * (n // 2) + [0] * (n // 2), ("a", "b"))
            s = stat_in_sample(parse_classifier("logistic"), d, trial)
            assert (Fraction(s).limit_denominator(10 ** 6) * n).denominator == 1


class TestKappaDefaults:
    def test_default_is_fifth_of_smaller_group(self):
        assert resolve_kappa(StatSpec("out-of-sample"), 50, 100) == 10

    def test_default_clamped_to_at_least_one(self):
        assert resolve_kappa(StatSpec("out-of-sample"), 4, 4) == 1

    def test_explicit_kappa_validated(self):
        with pytest.raises(ValueError, match="out of range"):
            resolve_kappa(StatSpec("out-of-sample", kappa=4), 4, 10)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            StatSpec("median")
        with pytest.raises(ValueError):
            StatSpec("out-of-sample", partitions=0)


class TestOutSample:
    def test_exact_mode_matches_oracle_l2_m2(self):
        d = Dataset([[2.0], [0.5], [-0.5], [-2.0]], [1, 1, 0, 0], ("x",))
        cspec = parse_classifier("logistic")
        spec = StatSpec("out-of-sample", kappa=1, partitions="exact")
        assert stat_out_sample(cspec, d, spec, 0) == pytest.approx(
            _oracle_out_sample(cspec, d, 1))

    def test_exact_mode_matches_oracle_l3_m4(self):
        rng = np.random.default_rng(8)
        d = Dataset(rng.normal(size=(7, 2)), [1, 1, 1, 0, 0, 0, 0], ("a", "b"))
        cspec = parse_classifier("knn:k=1")
        spec = StatSpec("out-of-sample", kappa=2, partitions="exact")
        assert stat_out_sample(cspec, d, spec, 0) == pytest.approx(
            _oracle_out_sample(cspec, d, 2))

    def test_exact_mode_enforces_group_limit(self):
        rng = np.random.default_rng(9)
        d = Dataset(rng.normal(size=(16, 1)), [1] * 8 + [0] * 8, ("x",))
        spec = StatSpec("out-of-sample", kappa=2, partitions="exact")
        with pytest.raises(ValueError, match="group sizes"):
            stat_out_sample(parse_classifier("logistic"), d, spec, 0)

    def test_null_data_knn_centers_on_half(self):
        # same distribution in both groups: expectation is 0.5
        cspec = parse_classifier("knn:k=1")
        spec = StatSpec("out-of-sample", kappa=2, partitions="exact")
        vals = []
        for rep in range(500):
            r = crng.stream(123, rep)
            d = Dataset(r.normal(size=(6, 2)), [1, 1, 1, 0, 0, 0], ("a", "b"))
            vals.append(stat_out_sample(cspec, d, spec, rep))
        assert abs(np.mean(vals) - 0.5) < 0.05

    def test_separated_groups_logistic_is_one_for_any_kappa(self):
        rng = np.random.default_rng(3)
        X = np.vstack([rng.normal(4.0, 0.3, (4, 1)), rng.normal(-4.0, 0.3, (4, 1))])
        d = Dataset(X, [1] * 4 + [0] * 4, ("x",))
        cspec = parse_classifier("logistic")
        for kappa in (1, 2, 3):
            spec = StatSpec("out-of-sample", kappa=kappa, partitions="exact")
            assert stat_out_sample(cspec, d, spec, 0) == 1.0

    def test_within_group_row_order_invariance(self):
        rng = np.random.default_rng(21)
        X = rng.normal(size=(8, 2))
        t = np.array([1, 1, 1, 1, 0, 0, 0, 0])
        d = Dataset(X, t, ("a", "b"))
        cspec = parse_classifier("logistic")
        spec = StatSpec("out-of-sample", kappa=2, partitions="exact")
        base = stat_out_sample(cspec, d, spec, 0)
        # permute rows within the treated block and within the control block
        order = np.array([2, 0, 3, 1, 6, 4, 7, 5])
        d2 = Dataset(X[order], t[order], ("a", "b"))
        assert stat_out_sample(cspec, d2, spec, 0) == pytest.approx(base)

    def test_monte_carlo_converges_to_exact(self):
        rng = np.random.default_rng(30)
        d = Dataset(rng.normal(size=(8, 2)), [1] * 4 + [0] * 4, ("a", "b"))
        cspec = parse_classifier("logistic")
        exact = stat_out_sample(
            cspec, d, StatSpec("out-of-sample", kappa=1, partitions="exact"), 0)
        mc = stat_out_sample(
            cspec, d, StatSpec("out-of-sample", kappa=1, partitions=2000), 0)
        assert abs(mc - exact) <= 0.01

    def test_partition_values_are_multiples_of_half_kappa(self):
        rng = np.random.default_rng(44)
        d = Dataset(rng.normal(size=(10, 2)), [1] * 5 + [0] * 5, ("a", "b"))
        kappa = 2
        spec = StatSpec("out-of-sample", kappa=kappa, partitions=40)
        s = stat_out_sample(parse_classifier("knn:k=3"), d, spec, 7)
        # average of 40 values, each a multiple of 1/(2 kappa)
        scaled = s * 40 * 2 * kappa
        assert abs(scaled - round(scaled)) < 1e-9

    def test_requires_out_spec(self):
        d = Dataset([[1.0], [2.0]], [1, 0], ("x",))
        with pytest.raises(ValueError, match="out-of-sample"):
            stat_out_sample(parse_classifier("logistic"), d, StatSpec(), 0)
