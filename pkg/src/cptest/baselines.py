"""Baseline tests and a type-I error study runner.

* Energy test: two-sample statistic built from pairwise Euclidean
  distances, calibrated by the same permutation engine (the pairwise
  distance matrix is computed once; relabelings only re-index it).
* Logistic likelihood-ratio test: asymptotic chi-squared comparison of a
  full logistic fit against the intercept-only fit.  Not permutation
  based; with many coefficients it over-rejects, which the study runner
  makes visible.
* ``run_type1_study``: draw null data, run a test, repeat; report the
  empirical rejection rate per alpha with its Monte Carlo standard error.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np
from scipy.linalg import qr
from scipy.spatial.distance import cdist
from scipy.stats import chi2

from . import rng
from .classifiers import logistic_loglik, _fit_logistic
from .dataset import MAIN_EFFECTS, Dataset, expand_design
from .parallel import parallel_map
from .perm import PermutationPlan, TestResult, ACROSS, finish_result, shuffle_labels

LRT_RIDGE_FLOOR = 1e-10


def energy_statistic(X: np.ndarray, Y: np.ndarray) -> float:
    """Two-sample energy statistic with the (l*m/n) scaling.

    E = (l*m/n) * [ (2/(l*m)) sum ||Xi - Yj||
                    - (1/l^2) sum ||Xi - Xj||
                    - (1/m^2) sum ||Yi - Yj|| ]

    Nonnegative, and zero exactly when the two samples are identical as
    multisets.  Since the p-value comes from permutation, any positive
    scaling would give identical inference.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    l, m = X.shape[0], Y.shape[0]
    between = cdist(X, Y).sum()
    within_x = cdist(X, X).sum()
    within_y = cdist(Y, Y).sum()
    return float((l * m / (l + m))
                 * (2.0 * between / (l * m)
                    - within_x / (l * l) - within_y / (m * m)))


def _energy_from_dist(D: np.ndarray, t: np.ndarray) -> float:
    tr = np.flatnonzero(t == 1)
    ct = np.flatnonzero(t == 0)
    l, m = tr.shape[0], ct.shape[0]
    between = D[np.ix_(tr, ct)].sum()
    within_x = D[np.ix_(tr, tr)].sum()
    within_y = D[np.ix_(ct, ct)].sum()
    return float((l * m / (l + m))
                 * (2.0 * between / (l * m)
                    - within_x / (l * l) - within_y / (m * m)))


def _energy_draw(b: int, D: np.ndarray, t: np.ndarray, seed: int) -> float:
    shuffled = shuffle_labels(t, None, ACROSS, rng.stream(seed, b, 0))
    return _energy_from_dist(D, shuffled)


def energy_test(d: Dataset, B: int = 999, seed: int = 0,
                workers: int = 1, progress=None) -> TestResult:
    """Permutation energy test with conservative ties."""
    if d.n < 4:
        raise ValueError("energy test needs at least 4 rows")
    plan = PermutationPlan(mode=ACROSS, B=B, master_seed=seed)
    start = time.perf_counter()
    D = cdist(d.covariates, d.covariates)
    observed = _energy_from_dist(D, d.treatment)
    fn = partial(_energy_draw, D=D, t=d.treatment, seed=seed)
    draws = parallel_map(fn, range(1, B + 1), workers, progress)
    elapsed = time.perf_counter() - start
    echo = {
        "statistic": "energy",
        "dataset": {"n": d.n, "p": d.p, "treated": d.n_treated,
                    "control": d.n_control},
        "plan": {"mode": plan.mode, "B": plan.B, "tie_break": plan.tie_break,
                 "master_seed": plan.master_seed},
    }
    return finish_result(observed, np.asarray(draws), plan, echo, elapsed)


def drop_collinear(X: np.ndarray) -> np.ndarray:
    """Indices of a maximal linearly independent column subset.

    Pivoted QR on the column-centered matrix; centering makes columns
    collinear with the intercept (constants) drop out too.  Returned
    indices are sorted ascending so the retained design is deterministic.
    """
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    _, R, piv = qr(Xc, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return np.empty(0, dtype=int)
    tol = diag[0] * max(Xc.shape) * np.finfo(float).eps
    keep = piv[: int(np.sum(diag > tol))]
    return np.sort(keep)


@dataclass(frozen=True)
class LrtResult:
    p_value: float
    statistic: float
    df: int
    dropped: int


def lrt_logistic(d: Dataset, design: str = MAIN_EFFECTS,
                 include_squares: bool = False) -> LrtResult:
    """Likelihood-ratio test of the full logistic model against intercept-only.

    Both fits use a 1e-10 ridge floor standing in for an unpenalized fit.
    Collinear design columns are dropped (pivoted QR) and the chi-squared
    degrees of freedom shrink accordingly.
    """
    X = expand_design(d, design, include_squares).values
    keep = drop_collinear(X)
    dropped = X.shape[1] - keep.shape[0]
    Xr = X[:, keep]
    df = Xr.shape[1]
    t = d.treatment
    w_full, _, _ = _fit_logistic(Xr, t, LRT_RIDGE_FLOOR)
    w_null, _, _ = _fit_logistic(np.empty((d.n, 0)), t, LRT_RIDGE_FLOOR)
    stat = 2.0 * (logistic_loglik(w_full, Xr, t)
                  - logistic_loglik(w_null, np.empty((d.n, 0)), t))
    if df == 0:
        return LrtResult(1.0, float(stat), 0, dropped)
    return LrtResult(float(chi2.sf(stat, df)), float(stat), df, dropped)


# --------------------------------------------------------------------- #
# Type-I error study
# --------------------------------------------------------------------- #

Generator = Callable[[np.random.Generator], Dataset]
TestFn = Callable[[Dataset, int], float]


@dataclass(frozen=True)
class Type1StudyConfig:
    """A null-data generator, a test, and how often to repeat them.

    ``generator`` maps a random stream to a Dataset drawn under the null;
    ``test`` maps ``(dataset, seed)`` to a p-value.  At least 100
    replications are required for reportable rates.
    """

    generator: Generator
    test: TestFn
    replications: int
    alpha_grid: tuple[float, ...] = (0.01, 0.05, 0.1)
    seed: int = 0
    generator_name: str = ""
    test_name: str = ""

    def __post_init__(self):
        if self.replications < 100:
            raise ValueError("replications must be at least 100")
        for a in self.alpha_grid:
            if not 0.0 < a < 1.0:
                raise ValueError(f"alpha {a} outside (0, 1)")


@dataclass(frozen=True)
class Type1Study:
    """Rows of (alpha, rejection rate, MC standard error, replications)."""

    rows: tuple
    p_values: np.ndarray
    generator_name: str
    test_name: str


def _type1_rep(rep: int, cfg: Type1StudyConfig) -> float:
    try:
        d = cfg.generator(rng.stream(cfg.seed, rep, 0))
        return float(cfg.test(d, rng.seed_int(cfg.seed, rep, 1)))
    except Exception as exc:
        raise RuntimeError(f"replication {rep}: {exc}") from exc


def run_type1_study(cfg: Type1StudyConfig, workers: int = 1,
                    progress=None) -> Type1Study:
    """Empirical rejection rate of ``cfg.test`` on null data, per alpha."""
    ps = np.asarray(parallel_map(partial(_type1_rep, cfg=cfg),
                                 range(cfg.replications), workers, progress))
    rows = []
    for alpha in cfg.alpha_grid:
        rate = float(np.mean(ps <= alpha))
        se = float(np.sqrt(rate * (1.0 - rate) / cfg.replications))
        rows.append((float(alpha), rate, se, cfg.replications))
    return Type1Study(tuple(rows), ps, cfg.generator_name, cfg.test_name)
