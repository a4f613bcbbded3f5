"""Benchmark harness: synthetic workloads, baseline solutions, accuracy
scoring against the raw-data oracle, and the compute + storage cost model."""

from .baselines import AnswerSet, BaselineResult, FeatureQuery, observed_cohorts, run_baseline
from .cost import CostRates, SolutionCost, cost_model, normalize_costs
from .experiments import SUITES, BenchConfig, run_experiments
from .scoring import AccuracyReport, calibrate_sampling, score_accuracy
from .synth import SessionFrame, ZipfConfig, ZipfDataset, generate_zipf, unique_leaf_ratio
