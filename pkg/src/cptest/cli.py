"""Command-line front-end.

Subcommands: ``test`` (Monte Carlo permutation test), ``exact`` (full
enumeration, small n), ``simulate`` (power study over a correlation
grid), ``type1`` (type-I error study on null data), ``roc`` (ROC points
from two p-value files).  Primary results go to stdout or ``--out``;
progress goes to stderr so stdout stays machine-parseable.  Reruns with
identical flags (including ``--seed``) produce byte-identical primary
output files for any ``--workers`` value.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

from . import report
from .baselines import Type1StudyConfig, run_type1_study
from .classifiers import ClassifierSpec, FitError, parse_classifier, spec_from_json
from .dataset import DataError, Dataset, load_csv, standardize
from .perm import (ACROSS, WITHIN_BLOCK, PermutationPlan, exact_cpt,
                   null_distribution_report, run_cpt)
from .registry import BoundTest, build_stat_spec, resolve_test
from .sim import PRESETS, parse_generator, roc_points, run_power_study


class UsageError(Exception):
    """Flag-level validation failure; exits with code 2."""


def _default_seed() -> int:
    raw = os.environ.get("CPT_SEED", "0")
    try:
        seed = int(raw)
    except ValueError:
        raise UsageError(f"CPT_SEED must be an integer, got {raw!r}") from None
    if seed < 0:
        raise UsageError("CPT_SEED must be non-negative")
    return seed


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _pos_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    """Fixed-width help so --help output is stable for snapshot tests."""

    def __init__(self, prog):
        super().__init__(prog, width=96, max_help_position=30)


def _add_dataset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input CSV file")
    p.add_argument("--treatment", default="treatment",
                   help="name of the 0/1 treatment column")
    p.add_argument("--block", default=None,
                   help="name of the block column (enables --permute within)")
    p.add_argument("--one-hot", default="", metavar="COLS",
                   help="comma-separated categorical columns to expand "
                        "into k-1 indicators")
    p.add_argument("--standardize", action="store_true",
                   help="z-score every covariate column on the full sample")


def _add_stat_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--classifier", default="logistic2",
                   help="classifier spec: logistic | logistic2 | "
                        "forest:trees=200,mtry=sqrt | knn:k=1")
    p.add_argument("--stat", choices=("in", "out"), default="in",
                   help="in-sample or held-out accuracy statistic")
    p.add_argument("--kappa", type=_pos_int, default=None,
                   help="held-out rows per group (out stat; default "
                        "min(l,m)//5 clamped to [1, min-1])")
    p.add_argument("--partitions", default="30",
                   help='train/test partitions for the out stat: a count '
                        'or "exact"')


def _add_common_flags(p: argparse.ArgumentParser, seed_default: int) -> None:
    p.add_argument("--seed", type=_nonneg_int, default=seed_default,
                   help="master seed (falls back to CPT_SEED, then 0)")
    p.add_argument("--workers", type=_pos_int, default=argparse.SUPPRESS,
                   metavar="N",
                   help="process pool size (default: all available cores); "
                        "output is worker-count invariant")
    p.add_argument("--out", default=None, help="write primary output here "
                                               "instead of stdout")
    p.add_argument("--no-figures", action="store_true",
                   help="skip companion .png figures next to CSV outputs")
    p.add_argument("--quiet", action="store_true",
                   help="suppress progress reporting on stderr")


def build_parser(seed_default: int | None = None) -> argparse.ArgumentParser:
    if seed_default is None:
        seed_default = _default_seed()
    root = argparse.ArgumentParser(
        prog="cptest", formatter_class=_Formatter,
        description="Covariate balance testing with classifier-based "
                    "permutation inference.")
    sub = root.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("test", formatter_class=_Formatter,
                       help="Monte Carlo permutation test on a CSV dataset")
    _add_dataset_flags(p)
    _add_stat_flags(p)
    p.add_argument("--B", type=_pos_int, default=999,
                   help="number of label permutations")
    p.add_argument("--permute", choices=("across", "within"), default="across",
                   help="shuffle labels across the sample or within blocks")
    p.add_argument("--tie", choices=("conservative", "randomized"),
                   default="conservative", help="tie rule for the p-value")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="primary output: JSON result or null-distribution CSV")
    p.add_argument("--report", default=None, metavar="PREFIX",
                   help="also write PREFIX.null.csv and PREFIX.null.png")
    p.add_argument("--config", default=None,
                   help="JSON config file supplying defaults (flags win)")
    _add_common_flags(p, seed_default)

    p = sub.add_parser("exact", formatter_class=_Formatter,
                       help="exact permutation test by full enumeration")
    _add_dataset_flags(p)
    _add_stat_flags(p)
    p.add_argument("--config", default=None,
                   help="JSON config file supplying defaults (flags win)")
    _add_common_flags(p, seed_default)

    p = sub.add_parser("simulate", formatter_class=_Formatter,
                       help="Monte Carlo power study over a correlation grid")
    p.add_argument("--preset", choices=tuple(PRESETS), default="desk",
                   help="desk: 200 reps, B=199, coarse grid; "
                        "full: 1000 reps, B=500, 0.05 grid")
    p.add_argument("--tests", default=None,
                   help="comma-separated test specs (cpt-logistic2, "
                        "cpt-forest, energy, lrt-main, ...)")
    p.add_argument("--rho-grid", type=_float_list, default=None,
                   help="comma-separated correlation values")
    p.add_argument("--replications", type=_pos_int, default=None,
                   help="datasets per correlation value")
    p.add_argument("--B", type=_pos_int, default=None,
                   help="permutations per test")
    p.add_argument("--nt", type=_pos_int, default=None, help="treated rows")
    p.add_argument("--nc", type=_pos_int, default=None, help="control rows")
    p.add_argument("--p", type=_pos_int, default=None, help="covariate count")
    p.add_argument("--alphas", type=_float_list, default=None,
                   help="comma-separated significance levels")
    p.add_argument("--pvalues", default=None, metavar="FILE",
                   help="also write per-replication p-values CSV")
    p.add_argument("--roc-rho", type=float, default=None,
                   help="emit ROC points for this rho against the rho=0 nulls")
    p.add_argument("--roc-out", default=None, metavar="FILE",
                   help="ROC CSV path (requires --roc-rho)")
    _add_common_flags(p, seed_default)

    p = sub.add_parser("type1", formatter_class=_Formatter,
                       help="type-I error study on null data")
    p.add_argument("--generator", required=True,
                   help="null-data generator: mvn:rho=0,nt=20,nc=20,p=3 or "
                        "blocked:blocks=8,size=6,hi=5,lo=1,spread=2,p=2")
    p.add_argument("--test", required=True,
                   help="test spec (cpt-logistic2, energy, lrt-main, ...)")
    p.add_argument("--replications", type=_pos_int, default=300,
                   help="null datasets to draw (at least 100)")
    p.add_argument("--alphas", type=_float_list, default=(0.01, 0.05, 0.1),
                   help="comma-separated significance levels")
    p.add_argument("--B", type=_pos_int, default=199,
                   help="permutations per replication (permutation tests)")
    p.add_argument("--pvalues", default=None, metavar="FILE",
                   help="also write the raw p-values CSV")
    p.add_argument("--hist", default=None, metavar="FILE",
                   help="also write a p-value histogram CSV")
    _add_common_flags(p, seed_default)

    p = sub.add_parser("roc", formatter_class=_Formatter,
                       help="ROC points from two p-value files")
    p.add_argument("--null", required=True, metavar="FILE",
                   help="CSV of p-values under the null")
    p.add_argument("--alt", required=True, metavar="FILE",
                   help="CSV of p-values under the alternative")
    p.add_argument("--label", default="", help="test label for the output rows")
    p.add_argument("--rho", type=float, default=None,
                   help="rho annotation for the output rows")
    _add_common_flags(p, seed_default)
    return root


def _progress(quiet: bool, label: str):
    if quiet or not sys.stderr.isatty():
        return None

    def report_progress(done: int, total: int) -> None:
        step = max(1, total // 20)
        if done == total or done % step == 0:
            print(f"{label}: {done}/{total}", file=sys.stderr)

    return report_progress


def _apply_config(args: argparse.Namespace, parser_defaults: dict) -> None:
    """Merge --config JSON as defaults; explicitly passed flags win."""
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read --config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON in --config file: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("--config must contain a JSON object")
    for key, value in cfg.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, attr) == parser_defaults.get(attr):
            setattr(args, attr, value)


def _load_dataset(args: argparse.Namespace) -> Dataset:
    one_hot = tuple(c for c in args.one_hot.split(",") if c) \
        if isinstance(args.one_hot, str) else tuple(args.one_hot)
    d = load_csv(args.data, treatment_column=args.treatment,
                 block_column=args.block, one_hot=one_hot)
    if args.standardize:
        d = standardize(d)
    return d


def _classifier_from(args: argparse.Namespace) -> ClassifierSpec:
    try:
        if isinstance(args.classifier, dict):
            return spec_from_json(args.classifier)
        return parse_classifier(args.classifier)
    except ValueError as exc:
        raise UsageError(f"--classifier: {exc}") from exc


def _stat_from(args: argparse.Namespace):
    try:
        return build_stat_spec(args.stat, args.kappa, args.partitions)
    except ValueError as exc:
        raise UsageError(f"--stat/--kappa/--partitions: {exc}") from exc


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _note(args: argparse.Namespace, message: str) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


def _fig_path(csv_path: str) -> str:
    stem, _ = os.path.splitext(csv_path)
    return stem + ".png"


def _workers(args: argparse.Namespace) -> int:
    return getattr(args, "workers", None) or os.cpu_count() or 1


def _cmd_test(args: argparse.Namespace) -> int:
    if args.permute == "within" and args.block is None:
        raise UsageError("--permute within requires --block naming the "
                         "block column")
    cspec = _classifier_from(args)
    sspec = _stat_from(args)
    d = _load_dataset(args)
    mode = WITHIN_BLOCK if args.permute == "within" else ACROSS
    plan = PermutationPlan(mode, args.B, args.seed, args.tie)
    result = run_cpt(d, cspec, sspec, plan, _workers(args),
                     _progress(args.quiet, "permutation"))
    _note(args, f"p = {result.p_value:.6g} "
                f"(observed {result.observed:.6g}, {result.elapsed:.2f}s)")
    if args.format == "json":
        _emit(report.result_json(result), args.out)
    else:
        nd = null_distribution_report(result)
        if args.out is None:
            w = csv.writer(sys.stdout)
            w.writerow(("bin_low", "bin_high", "count"))
            w.writerows(nd.rows)
        else:
            report.write_null_distribution(nd, args.out)
    if args.report:
        nd = null_distribution_report(result)
        report.write_null_distribution(nd, args.report + ".null.csv")
        if not args.no_figures:
            report.fig_null_distribution(nd, args.report + ".null.png")
        _note(args, f"wrote {args.report}.null.csv")
    return 0


def _cmd_exact(args: argparse.Namespace) -> int:
    cspec = _classifier_from(args)
    sspec = _stat_from(args)
    d = _load_dataset(args)
    p = exact_cpt(d, cspec, sspec, args.seed, _workers(args))
    payload = {
        "p_value": p,
        "assignments": math.comb(d.n, d.n_treated),
        "seed": args.seed,
        "spec": {"classifier": cspec.to_json(),
                 "stat": {"kind": sspec.kind, "kappa": sspec.kappa,
                          "partitions": sspec.partitions},
                 "dataset": {"n": d.n, "p": d.p, "treated": d.n_treated,
                             "control": d.n_control}},
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    if args.out is None:
        raise UsageError("simulate requires --out for the power CSV")
    if (args.roc_rho is None) != (args.roc_out is None):
        raise UsageError("--roc-rho and --roc-out must be given together")
    overrides = {}
    if args.tests is not None:
        overrides["tests"] = tuple(t for t in args.tests.split(",") if t)
    if args.rho_grid is not None:
        overrides["rho_grid"] = args.rho_grid
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.B is not None:
        overrides["B"] = args.B
    if args.nt is not None:
        overrides["n_treated"] = args.nt
    if args.nc is not None:
        overrides["n_control"] = args.nc
    if args.p is not None:
        overrides["p"] = args.p
    if args.alphas is not None:
        overrides["alpha_levels"] = args.alphas
    overrides["seed"] = args.seed
    try:
        cfg = PRESETS[args.preset](**overrides)
        for t in cfg.tests:
            resolve_test(t)  # validate before any computation
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.roc_rho is not None and not any(
            abs(r - args.roc_rho) < 1e-12 for r in cfg.rho_grid):
        raise UsageError(f"--roc-rho {args.roc_rho} is not on the rho grid")
    if args.roc_rho is not None and not any(r == 0.0 for r in cfg.rho_grid):
        raise UsageError("--roc-rho needs rho=0 on the grid for the nulls")
    table = run_power_study(cfg, _workers(args),
                            _progress(args.quiet, "replication"))
    report.write_power_table(table, args.out)
    _note(args, f"wrote {args.out}")
    if not args.no_figures:
        report.fig_power_curves(table, _fig_path(args.out))
    if args.pvalues:
        report.write_power_pvalues(table, args.pvalues)
        _note(args, f"wrote {args.pvalues}")
    if args.roc_rho is not None:
        curves = {}
        rows_path = args.roc_out
        all_points = []
        for test in cfg.tests:
            nulls = table.pvalues_for(test, 0.0)
            alts = table.pvalues_for(test, args.roc_rho)
            pts = roc_points(nulls, alts)
            curves[test] = pts
            all_points.extend((test, args.roc_rho, x, y) for x, y in pts)
        report.write_csv(rows_path, ("test", "rho", "fpr", "tpr"), all_points)
        _note(args, f"wrote {rows_path}")
        if not args.no_figures:
            report.fig_roc(curves, _fig_path(rows_path))
    return 0


def _cmd_type1(args: argparse.Namespace) -> int:
    if args.out is None:
        raise UsageError("type1 requires --out for the rates CSV")
    try:
        gen_name, gen = parse_generator(args.generator)
    except ValueError as exc:
        raise UsageError(f"--generator: {exc}") from exc
    try:
        test = resolve_test(args.test)
    except ValueError as exc:
        raise UsageError(f"--test: {exc}") from exc
    cfg = Type1StudyConfig(
        generator=gen, test=BoundTest(test, args.B),
        replications=args.replications, alpha_grid=args.alphas,
        seed=args.seed, generator_name=gen_name, test_name=test.name)
    study = run_type1_study(cfg, _workers(args),
                            _progress(args.quiet, "replication"))
    report.write_type1_rates(study, args.out)
    _note(args, f"wrote {args.out}")
    if not args.no_figures:
        report.fig_pvalue_hist(study.p_values, _fig_path(args.out))
    if args.pvalues:
        report.write_pvalue_list(study.p_values, args.pvalues)
    if args.hist:
        report.write_histogram(study.p_values, args.hist)
    return 0


def _read_pvalues(path: str) -> list[float]:
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"empty p-value file: {path}")
    header = [c.strip() for c in rows[0]]
    if "p_value" in header:
        col = header.index("p_value")
        body = rows[1:]
    else:
        col = 0
        body = rows
        try:
            float(rows[0][0])
        except ValueError:
            body = rows[1:]  # single unnamed header line
    try:
        return [float(r[col]) for r in body]
    except (ValueError, IndexError) as exc:
        raise DataError(f"cannot parse p-values from {path}: {exc}") from exc


def _cmd_roc(args: argparse.Namespace) -> int:
    if args.out is None:
        raise UsageError("roc requires --out for the ROC CSV")
    nulls = _read_pvalues(args.null)
    alts = _read_pvalues(args.alt)
    pts = roc_points(nulls, alts)
    rho = "" if args.rho is None else args.rho
    report.write_roc(pts, args.out, args.label, rho)
    _note(args, f"wrote {args.out}")
    if not args.no_figures:
        report.fig_roc({args.label or "test": pts}, _fig_path(args.out))
    return 0


_COMMANDS = {
    "test": _cmd_test,
    "exact": _cmd_exact,
    "simulate": _cmd_simulate,
    "type1": _cmd_type1,
    "roc": _cmd_roc,
}


def main(argv: list[str] | None = None) -> int:
    """Entry point; returns 0 on success, 2 on usage error, 1 on failure."""
    try:
        parser = build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        if hasattr(args, "config"):
            defaults = {a.dest: a.default
                        for sp in parser._subparsers._group_actions
                        for a in sp.choices[args.command]._actions}
            _apply_config(args, defaults)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"cptest: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FitError, ValueError, RuntimeError, OSError) as exc:
        print(f"cptest: {exc}", file=sys.stderr)
        return 1


def console() -> None:
    sys.exit(main())
