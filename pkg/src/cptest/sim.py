"""Monte Carlo power-study harness.

The core design: treated covariates are drawn from a mean-zero
multivariate normal with equicorrelation ``rho`` while control
covariates are independent standard normal, so the two groups differ
only in correlation and marginal tests see nothing.  Sweeping ``rho``
and repeating gives power curves; nulls at ``rho = 0`` plus alternatives
at a fixed ``rho`` give ROC curves.

Seeding is per (rho index, replication, test index), so studies are
reproducible and order-independent under parallel execution.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import partial
from typing import Callable

import numpy as np

from . import rng
from .dataset import Dataset
from .parallel import parallel_map
from .registry import ResolvedTest, resolve_test


def _equicorrelation(p: int, rho: float) -> np.ndarray:
    # eigenvalues are 1 + (p-1) rho (once) and 1 - rho (p-1 times)
    if rho >= 1.0 or (p > 1 and rho <= -1.0 / (p - 1)):
        raise ValueError(f"rho={rho} makes the {p}x{p} equicorrelation "
                         f"matrix non-positive-definite")
    return (1.0 - rho) * np.eye(p) + rho * np.ones((p, p))


def mvn_shift_dataset(rho: float, n_treated: int, n_control: int, p: int,
                      r: np.random.Generator) -> Dataset:
    """Treated rows N(0, Sigma_rho), control rows N(0, I), from one stream."""
    L = np.linalg.cholesky(_equicorrelation(p, rho))
    treated = r.standard_normal((n_treated, p)) @ L.T
    control = r.standard_normal((n_control, p))
    cov = np.vstack([treated, control])
    t = np.concatenate([np.ones(n_treated, dtype=int),
                        np.zeros(n_control, dtype=int)])
    names = tuple(f"x{j + 1}" for j in range(p))
    return Dataset(cov, t, names)


def gen_mvn_dataset(rho: float, n_treated: int, n_control: int,
                    seed: int = 0, p: int = 3) -> Dataset:
    """Seed-keyed wrapper around :func:`mvn_shift_dataset`."""
    return mvn_shift_dataset(rho, n_treated, n_control, p, rng.stream(seed))


def blocked_confounded_dataset(n_blocks: int, block_size: int,
                               treated_high: int, treated_low: int,
                               spread: float, p: int,
                               r: np.random.Generator) -> Dataset:
    """Blocks with distinct covariate means and mean-dependent treated counts.

    Each block draws a mean vector; blocks whose first mean coordinate is
    positive get ``treated_high`` treated units, the rest ``treated_low``,
    so the treated share co-varies with the covariates across blocks.
    Within each block the treated units are a uniform random subset, so
    within-block relabeling matches the true assignment mechanism while a
    full shuffle does not.
    """
    if not (0 < treated_low and treated_high < block_size):
        raise ValueError("treated counts must satisfy 0 < low, high < block size")
    rows = []
    labels = []
    blocks = []
    for j in range(n_blocks):
        mean = spread * r.standard_normal(p)
        rows.append(mean + r.standard_normal((block_size, p)))
        count = treated_high if mean[0] > 0 else treated_low
        t = np.zeros(block_size, dtype=int)
        t[np.sort(r.permutation(block_size)[:count])] = 1
        labels.append(t)
        blocks.extend([f"b{j:02d}"] * block_size)
    names = tuple(f"x{j + 1}" for j in range(p))
    return Dataset(np.vstack(rows), np.concatenate(labels), names, tuple(blocks))


def gen_blocked_dataset(n_blocks: int, block_size: int, treated_high: int,
                        treated_low: int, spread: float = 2.0, p: int = 2,
                        seed: int = 0) -> Dataset:
    """Seed-keyed wrapper around :func:`blocked_confounded_dataset`."""
    return blocked_confounded_dataset(n_blocks, block_size, treated_high,
                                      treated_low, spread, p, rng.stream(seed))


def parse_generator(text: str) -> tuple[str, Callable[[np.random.Generator], Dataset]]:
    """Parse a generator spec string into (name, stream -> Dataset).

    ``mvn:rho=0,nt=100,nc=100,p=3`` or
    ``blocked:blocks=8,size=6,hi=4,lo=2,spread=2,p=2``.
    """
    head, _, opts = text.strip().partition(":")
    pairs = {}
    if opts:
        for item in opts.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise ValueError(f"malformed generator option {item!r}")
            pairs[key.strip()] = val.strip()
    if head == "mvn":
        unknown = set(pairs) - {"rho", "nt", "nc", "p"}
        if unknown:
            raise ValueError(f"unknown mvn option(s): {sorted(unknown)}")
        rho = float(pairs.get("rho", 0.0))
        nt = int(pairs.get("nt", 100))
        nc = int(pairs.get("nc", 100))
        p = int(pairs.get("p", 3))
        _equicorrelation(p, rho)  # validate now, not at first draw
        return (text.strip(),
                partial(mvn_shift_dataset, rho, nt, nc, p))
    if head == "blocked":
        unknown = set(pairs) - {"blocks", "size", "hi", "lo", "spread", "p"}
        if unknown:
            raise ValueError(f"unknown blocked option(s): {sorted(unknown)}")
        return (text.strip(),
                partial(blocked_confounded_dataset,
                        int(pairs.get("blocks", 8)), int(pairs.get("size", 6)),
                        int(pairs.get("hi", 4)), int(pairs.get("lo", 2)),
                        float(pairs.get("spread", 2.0)), int(pairs.get("p", 2))))
    raise ValueError(f"unknown generator {head!r} (expected mvn or blocked)")


@dataclass(frozen=True)
class SimulationConfig:
    """Grid and scale of a power study."""

    n_treated: int = 100
    n_control: int = 100
    p: int = 3
    rho_grid: tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(16))
    replications: int = 1000
    alpha_levels: tuple[float, ...] = (0.05, 0.01)
    B: int = 500
    tests: tuple[str, ...] = ("cpt-logistic2", "cpt-logistic", "energy")
    seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be positive")
        for rho in self.rho_grid:
            _equicorrelation(self.p, rho)
        for a in self.alpha_levels:
            if not 0.0 < a < 1.0:
                raise ValueError(f"alpha {a} outside (0, 1)")


def desk_config(**overrides) -> SimulationConfig:
    """Reduced preset that completes in minutes."""
    cfg = SimulationConfig(
        rho_grid=(0.0, 0.15, 0.3, 0.45, 0.6, 0.75),
        replications=200,
        B=199,
    )
    return replace(cfg, **overrides) if overrides else cfg


def full_scale_config(**overrides) -> SimulationConfig:
    """Full-scale preset (1000 replications, B = 500, 16 rho values)."""
    cfg = SimulationConfig()
    return replace(cfg, **overrides) if overrides else cfg


PRESETS = {"desk": desk_config, "full": full_scale_config}


@dataclass(frozen=True)
class PowerTable:
    """Power estimates plus the raw p-values behind them.

    ``rows`` holds (test, rho, alpha, power, se); ``p_values`` maps
    (test, rho) to the per-replication p-value array.
    """

    rows: tuple
    p_values: dict

    def pvalues_for(self, test: str, rho: float) -> np.ndarray:
        return self.p_values[(test, float(rho))]


def _power_cell(task: tuple, cfg: SimulationConfig,
                tests: tuple[ResolvedTest, ...]) -> tuple:
    ri, rep = task
    d = mvn_shift_dataset(cfg.rho_grid[ri], cfg.n_treated, cfg.n_control,
                          cfg.p, rng.stream(cfg.seed, ri, rep, 0))
    out = []
    for ti, test in enumerate(tests):
        try:
            out.append(test.run(d, cfg.B, rng.seed_int(cfg.seed, ri, rep, 1 + ti), 1))
        except Exception as exc:
            raise RuntimeError(
                f"rho={cfg.rho_grid[ri]} replication {rep} test "
                f"{test.name!r}: {exc}") from exc
    return tuple(out)


def run_power_study(cfg: SimulationConfig, workers: int = 1,
                    progress=None) -> PowerTable:
    """Estimate power for every configured test across the rho grid."""
    tests = tuple(resolve_test(t) for t in cfg.tests)
    tasks = [(ri, rep) for ri in range(len(cfg.rho_grid))
             for rep in range(cfg.replications)]
    cells = parallel_map(partial(_power_cell, cfg=cfg, tests=tests),
                         tasks, workers, progress)
    pvals: dict = {(t.name, float(rho)): np.empty(cfg.replications)
                   for t in tests for rho in cfg.rho_grid}
    for (ri, rep), cell in zip(tasks, cells):
        for t, p in zip(tests, cell):
            pvals[(t.name, float(cfg.rho_grid[ri]))][rep] = p
    rows = []
    for t in tests:
        for rho in cfg.rho_grid:
            ps = pvals[(t.name, float(rho))]
            for alpha in cfg.alpha_levels:
                power = float(np.mean(ps <= alpha))
                se = float(np.sqrt(power * (1.0 - power) / cfg.replications))
                rows.append((t.name, float(rho), float(alpha), power, se))
    return PowerTable(tuple(rows), pvals)


def roc_points(null_pvalues, alt_pvalues) -> list[tuple[float, float]]:
    """ROC curve of p-value thresholding: false rate vs true rate.

    For each threshold in the sorted union of the two p-value sets the
    point is (fraction of null p <= t, fraction of alternative p <= t);
    the endpoints (0, 0) and (1, 1) are always included.
    """
    null_p = np.asarray(list(null_pvalues), dtype=float)
    alt_p = np.asarray(list(alt_pvalues), dtype=float)
    if null_p.size == 0 or alt_p.size == 0:
        raise ValueError("roc_points needs nonempty p-value lists")
    points = [(0.0, 0.0)]
    for thr in sorted(set(null_p.tolist()) | set(alt_p.tolist())):
        points.append((float(np.mean(null_p <= thr)),
                       float(np.mean(alt_p <= thr))))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    return points
