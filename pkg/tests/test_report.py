"""Tests for CSV emission and figure rendering."""

import csv
import json

import numpy as np

from cptest.baselines import Type1Study
from cptest.perm import NullDistributionReport
from cptest.perm import TestResult as PermTestResult
from cptest.report import (fig_null_distribution, fig_power_curves,
                           fig_pvalue_hist, fig_roc, histogram_rows,
                           result_json, write_histogram,
                           write_null_distribution, write_power_table,
                           write_roc, write_type1_rates)
from cptest.sim import PowerTable


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_json_payload_is_stable_and_omits_timing():
    r = PermTestResult(0.75, np.array([0.5, 0.75]), 2 / 3,
                       {"statistic": "classification-accuracy"}, 1.23, 9)
    text = result_json(r)
    payload = json.loads(text)
    assert payload["observed"] == 0.75
    assert payload["seed"] == 9
    assert "elapsed" not in payload
    # byte-stable across calls
    assert text == result_json(
        PermTestResult(0.75, np.array([0.5, 0.75]), 2 / 3,
                       {"statistic": "classification-accuracy"}, 9.99, 9))


def test_null_distribution_csv_schema(tmp_path):
    rep = NullDistributionReport(((0.4, 0.5, 3), (0.5, 0.6, 7)), 0.55)
    path = str(tmp_path / "null.csv")
    write_null_distribution(rep, path)
    rows = _read(path)
    assert rows[0] == ["bin_low", "bin_high", "count"]
    assert rows[1] == ["0.4", "0.5", "3"]


def test_power_table_csv_schema(tmp_path):
    table = PowerTable((("energy", 0.0, 0.05, 0.04, 0.01),), {})
    path = str(tmp_path / "power.csv")
    write_power_table(table, path)
    rows = _read(path)
    assert rows[0] == ["test", "rho", "alpha", "power", "se"]
    assert rows[1][0] == "energy"


def test_type1_csv_schema(tmp_path):
    study = Type1Study(((0.05, 0.04, 0.011, 300),), np.array([0.2]), "g", "t")
    path = str(tmp_path / "rates.csv")
    write_type1_rates(study, path)
    rows = _read(path)
    assert rows[0] == ["alpha", "rejection_rate", "se", "replications"]


def test_roc_csv_schema(tmp_path):
    path = str(tmp_path / "roc.csv")
    write_roc([(0.0, 0.0), (1.0, 1.0)], path, "cpt-logistic2", 0.5)
    rows = _read(path)
    assert rows[0] == ["test", "rho", "fpr", "tpr"]
    assert rows[1] == ["cpt-logistic2", "0.5", "0.0", "0.0"]


def test_histogram_rows_partition_the_unit_interval():
    rows = histogram_rows([0.1, 0.2, 0.9], bins=10)
    assert len(rows) == 10
    assert sum(r[2] for r in rows) == 3
    assert rows[0][0] == 0.0 and rows[-1][1] == 1.0


def test_figures_render_nonempty_files(tmp_path):
    nd = NullDistributionReport(((0.4, 0.5, 3), (0.5, 0.6, 7)), 0.62)
    table = PowerTable((("energy", 0.0, 0.05, 0.04, 0.01),
                        ("energy", 0.5, 0.05, 0.60, 0.03)), {})
    paths = {
        "null": str(tmp_path / "null.png"),
        "power": str(tmp_path / "power.png"),
        "roc": str(tmp_path / "roc.png"),
        "hist": str(tmp_path / "hist.png"),
    }
    fig_null_distribution(nd, paths["null"])
    fig_power_curves(table, paths["power"])
    fig_roc({"energy": [(0.0, 0.0), (0.3, 0.8), (1.0, 1.0)]}, paths["roc"])
    fig_pvalue_hist(np.linspace(0, 1, 50), paths["hist"])
    for path in paths.values():
        with open(path, "rb") as fh:
            head = fh.read(8)
        assert head.startswith(b"\x89PNG")


def test_write_histogram(tmp_path):
    path = str(tmp_path / "h.csv")
    write_histogram([0.5, 0.5, 0.7], path, bins=4)
    rows = _read(path)
    assert rows[0] == ["bin_low", "bin_high", "count"]
    assert sum(int(r[2]) for r in rows[1:]) == 3
