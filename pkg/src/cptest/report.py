"""Delimited report output and companion figure rendering.

Every report path writes a small CSV in a pinned schema; next to each
CSV the CLI can render a matplotlib figure of the same content.  CSVs
are the primary outputs and are byte-stable across reruns; figures are
companions for quick inspection.
"""

from __future__ import annotations

import csv
import json
from typing import Iterable, Sequence

import numpy as np

from .baselines import Type1Study
from .perm import NullDistributionReport, TestResult
from .sim import PowerTable


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def result_json(result: TestResult) -> str:
    return json.dumps(result.to_json_dict(), indent=2) + "\n"


def write_test_result(result: TestResult, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(result_json(result))


def write_null_distribution(report: NullDistributionReport, path: str) -> None:
    write_csv(path, ("bin_low", "bin_high", "count"), report.rows)


def write_power_table(table: PowerTable, path: str) -> None:
    write_csv(path, ("test", "rho", "alpha", "power", "se"), table.rows)


def write_power_pvalues(table: PowerTable, path: str) -> None:
    rows = []
    for (test, rho), ps in table.p_values.items():
        for rep, p in enumerate(ps):
            rows.append((test, rho, rep, float(p)))
    write_csv(path, ("test", "rho", "replication", "p_value"), rows)


def write_type1_rates(study: Type1Study, path: str) -> None:
    write_csv(path, ("alpha", "rejection_rate", "se", "replications"), study.rows)


def write_pvalue_list(p_values, path: str) -> None:
    write_csv(path, ("p_value",), [(float(p),) for p in p_values])


def histogram_rows(values, bins: int = 20, lo: float = 0.0,
                   hi: float = 1.0) -> tuple:
    counts, edges = np.histogram(np.asarray(values, dtype=float),
                                 bins=bins, range=(lo, hi))
    return tuple((float(edges[i]), float(edges[i + 1]), int(counts[i]))
                 for i in range(len(counts)))


def write_histogram(values, path: str, bins: int = 20) -> None:
    write_csv(path, ("bin_low", "bin_high", "count"),
              histogram_rows(values, bins))


def write_roc(points, path: str, label: str = "", rho: float | str = "") -> None:
    write_csv(path, ("test", "rho", "fpr", "tpr"),
              [(label, rho, x, y) for x, y in points])


# --------------------------------------------------------------------- #
# Figures
# --------------------------------------------------------------------- #

def _plt():
    import matplotlib
    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt
    return plt


def fig_null_distribution(report: NullDistributionReport, path: str) -> None:
    """Null-draw histogram with the observed statistic marked."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    lows = [r[0] for r in report.rows]
    widths = [max(r[1] - r[0], 1e-9) for r in report.rows]
    counts = [r[2] for r in report.rows]
    ax.bar(lows, counts, width=widths, align="edge",
           color="steelblue", edgecolor="white", label="null draws")
    ax.axvline(report.observed, color="crimson", linewidth=2,
               label=f"observed = {report.observed:.4g}")
    ax.set_xlabel("test statistic")
    ax.set_ylabel("count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_power_curves(table: PowerTable, path: str) -> None:
    """Power vs rho, one line per (test, alpha)."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    series: dict = {}
    for test, rho, alpha, power, se in table.rows:
        series.setdefault((test, alpha), []).append((rho, power, se))
    styles = ["-", "--", ":", "-."]
    alphas = sorted({a for _, a in series}, reverse=True)
    for (test, alpha), pts in sorted(series.items()):
        pts.sort()
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        es = [p[2] for p in pts]
        style = styles[alphas.index(alpha) % len(styles)]
        ax.errorbar(xs, ys, yerr=es, linestyle=style, marker="o",
                    markersize=3, capsize=2,
                    label=f"{test} (alpha={alpha:g})")
    ax.set_xlabel("rho")
    ax.set_ylabel("power")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_roc(curves: dict, path: str) -> None:
    """ROC curves; ``curves`` maps label -> list of (fpr, tpr)."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 5))
    for label, pts in curves.items():
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label=label)
    ax.plot([0, 1], [0, 1], color="gray", linestyle=":", linewidth=1)
    ax.set_xlabel("false rejection rate")
    ax.set_ylabel("true rejection rate")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_pvalue_hist(p_values, path: str, bins: int = 20) -> None:
    """P-value histogram with the uniform density for reference."""
    plt = _plt()
    ps = np.asarray(list(p_values), dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(ps, bins=bins, range=(0.0, 1.0), color="steelblue",
            edgecolor="white", density=True)
    ax.axhline(1.0, color="crimson", linewidth=1.5, label="uniform")
    ax.set_xlabel("p-value")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
