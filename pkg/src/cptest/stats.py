"""Classification-accuracy test statistics.

Two statistics over a dataset and a classifier choice:

* In-sample accuracy: train on the full sample, return the fraction of
  rows whose predicted label matches treatment.  Always a multiple of 1/n.
* Out-of-sample accuracy with partition size ``kappa``: hold out exactly
  ``kappa`` treated and ``kappa`` control rows, train on the remaining
  ``n - 2*kappa`` rows, score the held-out rows, and average over
  partitions.  Monte Carlo mode averages over ``R`` uniformly drawn
  held-out subsets; exact mode enumerates every C(l, kappa) * C(m, kappa)
  subset pair.  Forcing the test set to have equal treated and control
  counts keeps the implied class prior at 50/50.

The exhaustive average over within-group row orders collapses to an
average over held-out subsets because training rows are always assembled
in their original dataset order, making the fitted model a function of
the held-out subset identity only.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import rng
from .classifiers import ClassifierSpec, classify_rows, train
from .dataset import Dataset, expand_design

IN_SAMPLE = "in-sample"
OUT_OF_SAMPLE = "out-of-sample"
EXACT_GROUP_LIMIT = 6   # exact partition enumeration needs l <= 6 and m <= 6


@dataclass(frozen=True)
class StatSpec:
    """Choice of test statistic.

    ``kappa=None`` resolves per dataset to ``min(l, m) // 5`` clamped to
    ``[1, min(l, m) - 1]`` (a test-set share near 20%).  ``partitions``
    is the Monte Carlo partition count R, or ``"exact"``.
    """

    kind: str = IN_SAMPLE
    kappa: int | None = None
    partitions: int | str = 30

    def __post_init__(self):
        if self.kind not in (IN_SAMPLE, OUT_OF_SAMPLE):
            raise ValueError(f"unknown statistic kind {self.kind!r}")
        if self.kappa is not None and self.kappa < 1:
            raise ValueError("kappa must be a positive integer")
        if self.partitions != "exact":
            if not isinstance(self.partitions, int) or self.partitions < 1:
                raise ValueError('partitions must be a positive integer or "exact"')


def resolve_kappa(spec: StatSpec, n_treated: int, n_control: int) -> int:
    lo = min(n_treated, n_control)
    if spec.kappa is None:
        kappa = min(max(lo // 5, 1), lo - 1)
    else:
        kappa = spec.kappa
    if not 1 <= kappa < lo:
        raise ValueError(f"kappa={kappa} out of range [1, {lo - 1}] "
                         f"for group sizes ({n_treated}, {n_control})")
    return kappa


def feature_matrix(cspec: ClassifierSpec, d: Dataset) -> np.ndarray:
    """Features the classifier trains on: the expanded design for logistic
    models, raw covariates otherwise."""
    if cspec.family == "logistic":
        return expand_design(d, cspec.design, cspec.include_squares).values
    return d.covariates


def in_sample_accuracy(cspec: ClassifierSpec, X: np.ndarray, t: np.ndarray,
                       seed: int = 0) -> float:
    """Array-level in-sample statistic; ``X`` is the feature matrix."""
    model = train(cspec, X, t, seed)
    preds = classify_rows(model, X)
    return float(np.mean(preds == t))


def stat_in_sample(cspec: ClassifierSpec, d: Dataset, seed: int = 0) -> float:
    """Fraction of the full sample correctly classified after training on it."""
    return in_sample_accuracy(cspec, feature_matrix(cspec, d), d.treatment, seed)


def _partition_accuracy(cspec: ClassifierSpec, X: np.ndarray, t: np.ndarray,
                        held_out: np.ndarray, seed: int) -> float:
    n = X.shape[0]
    train_mask = np.ones(n, dtype=bool)
    train_mask[held_out] = False
    model = train(cspec, X[train_mask], t[train_mask], seed)
    preds = classify_rows(model, X[held_out])
    return float(np.mean(preds == t[held_out]))


def out_sample_accuracy(cspec: ClassifierSpec, X: np.ndarray, t: np.ndarray,
                        stat: StatSpec, seed: int = 0) -> float:
    """Array-level out-of-sample statistic; ``X`` is the feature matrix."""
    treated = np.flatnonzero(t == 1)
    control = np.flatnonzero(t == 0)
    l, m = treated.shape[0], control.shape[0]
    kappa = resolve_kappa(stat, l, m)

    if stat.partitions == "exact":
        if l > EXACT_GROUP_LIMIT or m > EXACT_GROUP_LIMIT:
            raise ValueError(
                f"exact partition enumeration requires group sizes <= "
                f"{EXACT_GROUP_LIMIT}, got ({l}, {m})")
        values = []
        index = 0
        for ht in combinations(range(l), kappa):
            for hc in combinations(range(m), kappa):
                held = np.concatenate([treated[list(ht)], control[list(hc)]])
                values.append(_partition_accuracy(
                    cspec, X, t, held, rng.seed_int(seed, index)))
                index += 1
        return float(np.mean(values))

    values = []
    for r in range(stat.partitions):
        draw = rng.stream(seed, r, 0)
        ht = np.sort(draw.permutation(l)[:kappa])
        hc = np.sort(draw.permutation(m)[:kappa])
        held = np.concatenate([treated[ht], control[hc]])
        values.append(_partition_accuracy(
            cspec, X, t, held, rng.seed_int(seed, r, 1)))
    return float(np.mean(values))


def stat_out_sample(cspec: ClassifierSpec, d: Dataset, stat: StatSpec,
                    seed: int = 0) -> float:
    """Held-out accuracy averaged over train/test partitions.

    Each partition holds out ``kappa`` treated and ``kappa`` control rows.
    Per-partition accuracies are multiples of 1/(2*kappa); the result is
    their mean in a fixed order.
    """
    if stat.kind != OUT_OF_SAMPLE:
        raise ValueError("stat_out_sample needs an out-of-sample StatSpec")
    return out_sample_accuracy(cspec, feature_matrix(cspec, d), d.treatment,
                               stat, seed)


def accuracy_stat(cspec: ClassifierSpec, X: np.ndarray, t: np.ndarray,
                  stat: StatSpec, seed: int = 0) -> float:
    """Dispatch to the configured statistic on a prebuilt feature matrix."""
    if stat.kind == IN_SAMPLE:
        return in_sample_accuracy(cspec, X, t, seed)
    return out_sample_accuracy(cspec, X, t, stat, seed)


def evaluate_stat(cspec: ClassifierSpec, d: Dataset, stat: StatSpec,
                  seed: int = 0) -> float:
    """Dispatch to the configured statistic."""
    return accuracy_stat(cspec, feature_matrix(cspec, d), d.treatment, stat, seed)
