"""Test-spec strings shared by the CLI and the study runners.

Grammar (comma-separated ``key=value`` options after the head):

* ``cpt-<classifier>`` runs the classifier permutation test, e.g.
  ``cpt-logistic2``, ``cpt-forest:trees=100``, or with engine options
  ``cpt-logistic2:stat=out,kappa=5,partitions=30,permute=within``.
* ``exact-<classifier>`` enumerates all assignments (small n only).
* ``energy`` and ``lrt-main`` / ``lrt-interactions`` are the baselines.

Resolved tests are small frozen objects so study workers can pickle them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .baselines import energy_test, lrt_logistic
from .classifiers import ClassifierSpec, parse_classifier
from .dataset import Dataset, INTERACTIONS, MAIN_EFFECTS
from .perm import (ACROSS, CONSERVATIVE, RANDOMIZED, WITHIN_BLOCK,
                   PermutationPlan, exact_cpt, run_cpt)
from .stats import IN_SAMPLE, OUT_OF_SAMPLE, StatSpec

_ENGINE_KEYS = {"stat", "kappa", "partitions", "permute", "tie"}


@dataclass(frozen=True)
class CptTest:
    name: str
    cspec: ClassifierSpec
    sspec: StatSpec
    mode: str = ACROSS
    tie_break: str = CONSERVATIVE

    def run(self, d: Dataset, B: int, seed: int, workers: int = 1) -> float:
        plan = PermutationPlan(self.mode, B, seed, self.tie_break)
        return run_cpt(d, self.cspec, self.sspec, plan, workers).p_value


@dataclass(frozen=True)
class ExactCptTest:
    name: str
    cspec: ClassifierSpec
    sspec: StatSpec

    def run(self, d: Dataset, B: int, seed: int, workers: int = 1) -> float:
        return exact_cpt(d, self.cspec, self.sspec, seed, workers)


@dataclass(frozen=True)
class EnergyTest:
    name: str = "energy"

    def run(self, d: Dataset, B: int, seed: int, workers: int = 1) -> float:
        return energy_test(d, B, seed, workers).p_value


@dataclass(frozen=True)
class LrtTest:
    name: str
    design: str = MAIN_EFFECTS

    def run(self, d: Dataset, B: int, seed: int, workers: int = 1) -> float:
        return lrt_logistic(d, self.design).p_value


ResolvedTest = Union[CptTest, ExactCptTest, EnergyTest, LrtTest]


@dataclass(frozen=True)
class BoundTest:
    """A resolved test with its permutation budget fixed, callable as
    ``(dataset, seed) -> p`` the way the study runners expect."""

    test: ResolvedTest
    B: int

    def __call__(self, d: Dataset, seed: int) -> float:
        return self.test.run(d, self.B, seed, 1)


def _split_engine_options(text: str) -> tuple[str, dict]:
    head, _, opts = text.partition(":")
    engine: dict = {}
    cls_opts: list[str] = []
    if opts:
        for item in opts.split(","):
            key = item.split("=", 1)[0].strip()
            if key in _ENGINE_KEYS:
                _, eq, val = item.partition("=")
                if not eq:
                    raise ValueError(f"malformed option {item!r}")
                engine[key] = val.strip()
            else:
                cls_opts.append(item)
    return head + (":" + ",".join(cls_opts) if cls_opts else ""), engine


def build_stat_spec(kind: str = "in", kappa: str | int | None = None,
                    partitions: str | int | None = None) -> StatSpec:
    """StatSpec from CLI-style strings (``in`` / ``out``)."""
    if kind in ("in", IN_SAMPLE):
        return StatSpec(IN_SAMPLE)
    if kind not in ("out", OUT_OF_SAMPLE):
        raise ValueError(f"unknown statistic {kind!r} (expected in or out)")
    if partitions is None:
        parts: int | str = 30
    elif partitions == "exact":
        parts = "exact"
    else:
        parts = int(partitions)
    return StatSpec(OUT_OF_SAMPLE,
                    kappa=None if kappa is None else int(kappa),
                    partitions=parts)


def _permute_mode(value: str) -> str:
    if value in ("across", ACROSS):
        return ACROSS
    if value in ("within", WITHIN_BLOCK):
        return WITHIN_BLOCK
    raise ValueError(f"unknown permute mode {value!r} (expected across or within)")


def _tie_rule(value: str) -> str:
    if value in (CONSERVATIVE, RANDOMIZED):
        return value
    raise ValueError(f"unknown tie rule {value!r}")


def resolve_test(spec: str) -> ResolvedTest:
    """Resolve a test-spec string to a runnable test object."""
    text = spec.strip()
    if text == "energy":
        return EnergyTest()
    if text == "lrt-main":
        return LrtTest(text, MAIN_EFFECTS)
    if text == "lrt-interactions":
        return LrtTest(text, INTERACTIONS)
    for prefix in ("cpt-", "exact-"):
        if text.startswith(prefix):
            cls_text, engine = _split_engine_options(text[len(prefix):])
            cspec = parse_classifier(cls_text)
            sspec = build_stat_spec(engine.get("stat", "in"),
                                    engine.get("kappa"),
                                    engine.get("partitions"))
            if prefix == "exact-":
                for key in ("permute", "tie"):
                    if key in engine:
                        raise ValueError(f"{key!r} does not apply to exact tests")
                return ExactCptTest(text, cspec, sspec)
            return CptTest(text, cspec, sspec,
                           _permute_mode(engine.get("permute", "across")),
                           _tie_rule(engine.get("tie", CONSERVATIVE)))
    raise ValueError(
        f"unknown test spec {spec!r} (expected cpt-<classifier>, "
        f"exact-<classifier>, energy, lrt-main, or lrt-interactions)")
