"""Tests for the test-spec grammar shared by the CLI and study runners."""

import pytest

from cptest.dataset import INTERACTIONS, MAIN_EFFECTS
from cptest.perm import WITHIN_BLOCK
from cptest.registry import (BoundTest, CptTest, EnergyTest, ExactCptTest,
                             resolve_test)
from cptest.sim import gen_blocked_dataset, gen_mvn_dataset
from cptest.stats import IN_SAMPLE, OUT_OF_SAMPLE


class TestResolve:
    def test_energy(self):
        t = resolve_test("energy")
        assert isinstance(t, EnergyTest)

    def test_lrt_variants(self):
        assert resolve_test("lrt-main").design == MAIN_EFFECTS
        assert resolve_test("lrt-interactions").design == INTERACTIONS

    def test_cpt_with_classifier_options(self):
        t = resolve_test("cpt-forest:trees=40,mtry=2")
        assert isinstance(t, CptTest)
        assert t.cspec.trees == 40 and t.cspec.features_per_split == 2
        assert t.sspec.kind == IN_SAMPLE

    def test_cpt_engine_options(self):
        t = resolve_test("cpt-logistic2:stat=out,kappa=3,partitions=12,"
                         "permute=within,tie=randomized")
        assert t.sspec.kind == OUT_OF_SAMPLE
        assert t.sspec.kappa == 3 and t.sspec.partitions == 12
        assert t.mode == WITHIN_BLOCK and t.tie_break == "randomized"

    def test_exact_prefix(self):
        t = resolve_test("exact-knn:k=1")
        assert isinstance(t, ExactCptTest)
        assert t.cspec.k == 1

    def test_exact_rejects_permute(self):
        with pytest.raises(ValueError, match="permute"):
            resolve_test("exact-logistic:permute=within")

    def test_unknown_spec(self):
        with pytest.raises(ValueError, match="unknown test spec"):
            resolve_test("wilcoxon")

    def test_partitions_exact_token(self):
        t = resolve_test("cpt-logistic:stat=out,kappa=1,partitions=exact")
        assert t.sspec.partitions == "exact"


class TestRun:
    def test_each_test_returns_valid_pvalue(self):
        d = gen_mvn_dataset(0.0, 10, 10, seed=1, p=2)
        for spec in ("cpt-logistic", "cpt-knn:k=3", "energy", "lrt-main"):
            p = resolve_test(spec).run(d, 29, 7, 1)
            assert 0.0 < p <= 1.0

    def test_exact_run(self):
        d = gen_mvn_dataset(0.0, 4, 4, seed=2, p=2)
        p = resolve_test("exact-logistic").run(d, 19, 3, 1)
        assert 0.0 < p <= 1.0

    def test_within_mode_runs_on_blocked_data(self):
        d = gen_blocked_dataset(4, 4, 2, 1, spread=1.0, p=2, seed=3)
        p = resolve_test("cpt-logistic:permute=within").run(d, 29, 5, 1)
        assert 0.0 < p <= 1.0

    def test_bound_test_is_picklable_and_callable(self):
        import pickle
        bound = BoundTest(resolve_test("energy"), 19)
        bound2 = pickle.loads(pickle.dumps(bound))
        d = gen_mvn_dataset(0.0, 6, 6, seed=4, p=2)
        assert bound(d, 5) == bound2(d, 5)
