"""Covariate balance testing with classifier-based permutation inference.

Train a classifier to predict treatment from covariates, use its
accuracy as the test statistic, and calibrate by permutation: shuffle
the treatment labels, retrain from scratch, and compare.  High observed
accuracy relative to the shuffled refits is evidence that the covariate
distributions differ between groups.  Baseline tests (energy, logistic
likelihood ratio) and Monte Carlo power / type-I study harnesses are
included, all reproducible down to the byte given a seed.
"""

from .baselines import (LrtResult, Type1Study, Type1StudyConfig,
                        energy_statistic, energy_test, lrt_logistic,
                        run_type1_study)
from .classifiers import (ClassifierSpec, FitError, TrainedModel, classify,
                          classify_rows, loglik, parse_classifier, train)
from .dataset import (INTERACTIONS, MAIN_EFFECTS, DataError, Dataset,
                      DesignMatrix, expand_design, load_csv, standardize,
                      write_csv)
from .perm import (NullDistributionReport, PermutationPlan, TestResult,
                   exact_cpt, null_distribution_report, run_cpt,
                   shuffle_labels)
from .registry import resolve_test
from .sim import (PowerTable, SimulationConfig, desk_config,
                  full_scale_config, gen_blocked_dataset, gen_mvn_dataset,
                  roc_points, run_power_study)
from .stats import StatSpec, stat_in_sample, stat_out_sample

__version__ = "0.1.0"

__all__ = [
    "ClassifierSpec", "DataError", "Dataset", "DesignMatrix", "FitError",
    "INTERACTIONS", "LrtResult", "MAIN_EFFECTS", "NullDistributionReport",
    "PermutationPlan", "PowerTable", "SimulationConfig", "StatSpec",
    "TestResult", "TrainedModel", "Type1Study", "Type1StudyConfig",
    "classify", "classify_rows", "desk_config", "energy_statistic",
    "energy_test", "exact_cpt", "expand_design", "gen_blocked_dataset",
    "gen_mvn_dataset", "load_csv", "loglik", "lrt_logistic",
    "full_scale_config", "null_distribution_report", "parse_classifier",
    "resolve_test", "roc_points", "run_cpt", "run_power_study",
    "run_type1_study", "shuffle_labels", "standardize", "stat_in_sample",
    "stat_out_sample", "train", "write_csv",
]
