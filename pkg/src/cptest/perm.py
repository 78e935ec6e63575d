"""Permutation inference engine.

The test statistic is recomputed under random relabelings of treatment
(covariates fixed), retraining the classifier from scratch each time.
The reported p-value counts null draws at least as large as the observed
statistic, with the observed assignment included in the reference set:

    p = (1 + #{b : S*_b >= S}) / (B + 1)

Ties between the observed and permuted statistics count against
rejection (conservative), which preserves validity for any statistic.
The opt-in randomized tie rule ranks ties by independent uniforms and is
exact-sized; it is reproducible here because the tie uniforms derive
from the master seed.

Seeding: permutation ``b`` uses substream ``(seed, b, 0)`` for the label
shuffle, ``(seed, b, 1)`` for classifier randomness, and ``(seed, b, 2)``
for its tie uniform; the observed statistic is ``b = 0``.  Each draw is a
pure function of its index, so results are identical for 1 or N workers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import partial
from itertools import combinations

import numpy as np

from . import rng
from .classifiers import ClassifierSpec
from .dataset import Dataset
from .parallel import parallel_map
from .stats import StatSpec, accuracy_stat, feature_matrix

ACROSS = "across"
WITHIN_BLOCK = "within-block"
CONSERVATIVE = "conservative"
RANDOMIZED = "randomized"

EXACT_ASSIGNMENT_LIMIT = 50_000


class PermutationError(RuntimeError):
    """A statistic evaluation failed; the message carries the permutation index."""


@dataclass(frozen=True)
class PermutationPlan:
    """How treatment labels are shuffled and how many times."""

    mode: str = ACROSS
    B: int = 999
    master_seed: int = 0
    tie_break: str = CONSERVATIVE

    def __post_init__(self):
        if self.mode not in (ACROSS, WITHIN_BLOCK):
            raise ValueError(f"unknown permutation mode {self.mode!r}")
        if self.B < 19:
            raise ValueError("B must be at least 19")
        if self.tie_break not in (CONSERVATIVE, RANDOMIZED):
            raise ValueError(f"unknown tie rule {self.tie_break!r}")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")


@dataclass(frozen=True)
class TestResult:
    """Observed statistic, its permutation null draws, and the p-value."""

    observed: float
    null_draws: np.ndarray
    p_value: float
    spec_echo: dict
    elapsed: float
    seed: int

    def to_json_dict(self) -> dict:
        # elapsed is intentionally not serialized: primary output files
        # must be byte-identical across reruns and worker counts.
        return {
            "observed": self.observed,
            "p_value": self.p_value,
            "B": int(len(self.null_draws)),
            "seed": self.seed,
            "spec": self.spec_echo,
            "null_draws": [float(v) for v in self.null_draws],
        }


def shuffle_labels(T: np.ndarray, blocks: tuple[str, ...] | None,
                   mode: str, r: np.random.Generator) -> np.ndarray:
    """Uniformly shuffle treatment labels, globally or within each block.

    Treated counts are preserved globally, and per block in within-block
    mode.  Blocks are processed in order of first appearance so the
    stream consumption is deterministic.
    """
    T = np.asarray(T)
    if mode == ACROSS:
        return T[r.permutation(T.shape[0])]
    if blocks is None:
        raise ValueError("within-block shuffling requires block labels")
    out = T.copy()
    seen: dict[str, list[int]] = {}
    for i, b in enumerate(blocks):
        seen.setdefault(b, []).append(i)
    for label in seen:
        idx = np.asarray(seen[label])
        out[idx] = T[idx][r.permutation(idx.shape[0])]
    return out


def conservative_pvalue(observed: float, draws: np.ndarray) -> float:
    """(1 + #{draws >= observed}) / (B + 1); ties count against rejection."""
    draws = np.asarray(draws, dtype=float)
    return float((1 + int(np.sum(draws >= observed))) / (draws.shape[0] + 1))


def randomized_pvalue(observed: float, draws: np.ndarray, master_seed: int) -> float:
    """Tie-broken p-value: ties rank by independent uniforms per draw."""
    draws = np.asarray(draws, dtype=float)
    u0 = float(rng.stream(master_seed, 0, 2).uniform())
    u = np.array([rng.stream(master_seed, b, 2).uniform()
                  for b in range(1, draws.shape[0] + 1)])
    beats = (draws > observed) | ((draws == observed) & (u > u0))
    return float((1 + int(beats.sum())) / (draws.shape[0] + 1))


def finish_result(observed: float, draws: np.ndarray, plan: PermutationPlan,
                  spec_echo: dict, elapsed: float) -> TestResult:
    if plan.tie_break == RANDOMIZED:
        p = randomized_pvalue(observed, draws, plan.master_seed)
    else:
        p = conservative_pvalue(observed, draws)
    return TestResult(float(observed), np.asarray(draws, dtype=float), p,
                      spec_echo, elapsed, plan.master_seed)


def _cpt_draw(b: int, X: np.ndarray, t: np.ndarray,
              blocks: tuple[str, ...] | None, cspec: ClassifierSpec,
              sspec: StatSpec, plan: PermutationPlan) -> float:
    try:
        shuffled = shuffle_labels(t, blocks, plan.mode,
                                  rng.stream(plan.master_seed, b, 0))
        return accuracy_stat(cspec, X, shuffled, sspec,
                             rng.seed_int(plan.master_seed, b, 1))
    except Exception as exc:
        raise PermutationError(f"permutation {b}: {exc}") from exc


def _echo(d: Dataset, cspec: ClassifierSpec, sspec: StatSpec,
          plan: PermutationPlan | None, statistic: str) -> dict:
    echo = {
        "statistic": statistic,
        "classifier": cspec.to_json(),
        "stat": {"kind": sspec.kind, "kappa": sspec.kappa,
                 "partitions": sspec.partitions},
        "dataset": {"n": d.n, "p": d.p, "treated": d.n_treated,
                    "control": d.n_control,
                    "blocks": len(set(d.blocks)) if d.blocks else None},
    }
    if plan is not None:
        echo["plan"] = {"mode": plan.mode, "B": plan.B,
                        "tie_break": plan.tie_break,
                        "master_seed": plan.master_seed}
    return echo


def run_cpt(d: Dataset, cspec: ClassifierSpec, sspec: StatSpec,
            plan: PermutationPlan, workers: int = 1,
            progress=None) -> TestResult:
    """Monte Carlo classification permutation test.

    Trains on the observed labels, then on ``plan.B`` shuffled label
    vectors, and compares the accuracies.  Deterministic given
    ``(d, cspec, sspec, plan)`` for any worker count.
    """
    if plan.mode == WITHIN_BLOCK and d.blocks is None:
        raise ValueError("within-block plan requires a dataset with blocks")
    start = time.perf_counter()
    X = feature_matrix(cspec, d)
    observed = accuracy_stat(cspec, X, d.treatment, sspec,
                             rng.seed_int(plan.master_seed, 0, 1))
    fn = partial(_cpt_draw, X=X, t=d.treatment, blocks=d.blocks,
                 cspec=cspec, sspec=sspec, plan=plan)
    draws = parallel_map(fn, range(1, plan.B + 1), workers, progress)
    elapsed = time.perf_counter() - start
    return finish_result(observed, np.asarray(draws), plan,
                         _echo(d, cspec, sspec, plan, "classification-accuracy"),
                         elapsed)


def _assignment_stat(treated_rows: tuple, X: np.ndarray, n: int,
                     cspec: ClassifierSpec, sspec: StatSpec, seed: int) -> float:
    labels = np.zeros(n, dtype=int)
    labels[list(treated_rows)] = 1
    return accuracy_stat(cspec, X, labels, sspec, seed)


def exact_cpt(d: Dataset, cspec: ClassifierSpec, sspec: StatSpec,
              seed: int = 0, workers: int = 1) -> float:
    """Exact permutation p-value by enumerating all C(n, l) assignments.

    Deterministic classifiers only (a randomized family would make the
    enumerated statistics draws rather than fixed values).  The observed
    assignment is part of the enumeration, so p >= 1 / C(n, l).  With a
    Monte Carlo out-of-sample statistic, one fixed partition stream is
    applied to every assignment so the statistic is a fixed function.
    """
    if cspec.is_randomized:
        raise ValueError(f"exact enumeration rejects randomized classifier "
                         f"family {cspec.family!r}")
    n, l = d.n, d.n_treated
    total = math.comb(n, l)
    if total > EXACT_ASSIGNMENT_LIMIT:
        raise ValueError(f"C({n}, {l}) = {total} exceeds the exact "
                         f"enumeration limit of {EXACT_ASSIGNMENT_LIMIT}")
    X = feature_matrix(cspec, d)
    stat_seed = rng.seed_int(seed, 0, 1)
    observed = _assignment_stat(tuple(d.treated_indices()), X, n, cspec,
                                sspec, stat_seed)
    fn = partial(_assignment_stat, X=X, n=n, cspec=cspec, sspec=sspec,
                 seed=stat_seed)
    values = parallel_map(fn, combinations(range(n), l), workers)
    count = int(np.sum(np.asarray(values) >= observed))
    return count / total


@dataclass(frozen=True)
class NullDistributionReport:
    """Fixed-width histogram of the null draws plus the observed marker."""

    rows: tuple            # (bin_low, bin_high, count) triples
    observed: float

    def total(self) -> int:
        return sum(r[2] for r in self.rows)


def null_distribution_report(result: TestResult, bins: int = 20) -> NullDistributionReport:
    """Bin the null draws into ``bins`` equal-width bins over their range."""
    draws = np.asarray(result.null_draws, dtype=float)
    if draws.size == 0:
        raise ValueError("no null draws to report")
    lo, hi = float(draws.min()), float(draws.max())
    if lo == hi:
        return NullDistributionReport(((lo, hi, int(draws.size)),),
                                      result.observed)
    counts, edges = np.histogram(draws, bins=bins, range=(lo, hi))
    rows = tuple((float(edges[i]), float(edges[i + 1]), int(counts[i]))
                 for i in range(len(counts)))
    return NullDistributionReport(rows, result.observed)
