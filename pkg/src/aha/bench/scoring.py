"""Accuracy scoring against the raw-data oracle and sampling-rate calibration.

Metric accuracy is 1 minus the per-cohort normalized RMSE (clamped to
[0, 1]); task accuracy is the fraction of (cohort, epoch, config) detector
decisions that agree with decisions derived from oracle features. Both are
reported as the mean across cohorts and the 10th-percentile cohort, i.e.
the accuracy that 90 percent of cohorts meet or beat.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..aggregates import StatisticRequest
from ..detectors import DetectorConfig, FeaturePoint, run_detector
from ..errors import SchemaError
from ..schema import CohortPattern, EpochId
from .baselines import AnswerSet, BaselineResult, FeatureQuery, run_baseline
from .synth import ZipfDataset

DEFAULT_RATE_GRID = (0.01, 0.02, 0.05, 0.10, 0.20, 0.50, 1.0)

_TINY = 1e-12


@dataclass
class AccuracyReport:
    metric_mean: float
    metric_p10: float
    task_mean: float
    task_p10: float
    per_cohort_metric: np.ndarray
    per_cohort_task: np.ndarray

    def summary(self) -> dict:
        return {
            "metric_accuracy_mean": self.metric_mean,
            "metric_accuracy_p10": self.metric_p10,
            "task_accuracy_mean": self.task_mean,
            "task_accuracy_p10": self.task_p10,
        }


def _answer_maps(result: BaselineResult | Mapping[StatisticRequest, AnswerSet]):
    return result.answers if isinstance(result, BaselineResult) else result


def _check_aligned(a: AnswerSet, b: AnswerSet) -> None:
    if a.patterns != b.patterns or a.epochs != b.epochs:
        raise SchemaError("answer sets cover different patterns or epochs")


def _features(answers: AnswerSet, p: int) -> list[FeaturePoint]:
    values, present = answers.series(p)
    return [
        FeaturePoint(EpochId(int(e)), float(values[i]) if present[i] else None)
        for i, e in enumerate(answers.epochs)
    ]


def score_accuracy(
    answers: BaselineResult | Mapping[StatisticRequest, AnswerSet],
    oracle: BaselineResult | Mapping[StatisticRequest, AnswerSet],
    detector_configs: Sequence[DetectorConfig] = (),
) -> AccuracyReport:
    """Score a solution's answers against the oracle's.

    An epoch where the oracle has a value but the solution does not counts
    fully against both scores (the estimate is treated as 0 and the
    detector sees an empty epoch).
    """
    answer_map = _answer_maps(answers)
    oracle_map = _answer_maps(oracle)
    if set(answer_map) != set(oracle_map):
        raise SchemaError("answers and oracle cover different query sets")

    first = next(iter(oracle_map.values()))
    n_patterns = len(first.patterns)
    err_sq = np.zeros(n_patterns)
    ref_sq = np.zeros(n_patterns)
    cells = np.zeros(n_patterns, dtype=int)
    for stat, truth in oracle_map.items():
        est = answer_map[stat]
        _check_aligned(est, truth)
        where = truth.present
        filled = np.where(est.present, est.values, 0.0)
        diff = np.where(where, filled - np.nan_to_num(truth.values), 0.0)
        err_sq += np.sum(diff * diff, axis=1)
        ref_sq += np.sum(np.where(where, np.nan_to_num(truth.values) ** 2, 0.0), axis=1)
        cells += where.sum(axis=1)

    metric = np.ones(n_patterns)
    scored = cells > 0
    rmse = np.sqrt(np.divide(err_sq, cells, out=np.zeros_like(err_sq), where=scored))
    scale = np.sqrt(np.divide(ref_sq, cells, out=np.zeros_like(ref_sq), where=scored))
    with np.errstate(invalid="ignore", divide="ignore"):
        nrmse = np.where(scale > 0, rmse / np.maximum(scale, _TINY), np.where(rmse > 0, np.inf, 0.0))
    metric[scored] = np.clip(1.0 - nrmse[scored], 0.0, 1.0)

    if detector_configs:
        task = np.ones(n_patterns)
        for p in range(n_patterns):
            agree = total = 0
            for config in detector_configs:
                stat = config.feature
                if stat not in oracle_map:
                    raise SchemaError(
                        f"detector feature {stat.render()} is not part of the query set"
                    )
                truth_series = _features(oracle_map[stat], p)
                est_series = _features(answer_map[stat], p)
                pattern = CohortPattern(oracle_map[stat].patterns[p])
                truth_out = run_detector(truth_series, config, pattern)
                est_out = run_detector(est_series, config, pattern)
                for a, b in zip(truth_out.points, est_out.points):
                    total += 1
                    agree += a.decision is b.decision
            task[p] = agree / total if total else 1.0
    else:
        task = np.ones(n_patterns)

    return AccuracyReport(
        metric_mean=float(np.mean(metric)) if n_patterns else 1.0,
        metric_p10=float(np.percentile(metric, 10)) if n_patterns else 1.0,
        task_mean=float(np.mean(task)) if n_patterns else 1.0,
        task_p10=float(np.percentile(task, 10)) if n_patterns else 1.0,
        per_cohort_metric=metric,
        per_cohort_task=task,
    )


def _per_cohort_relative_error(
    answers: Mapping[StatisticRequest, AnswerSet],
    oracle: Mapping[StatisticRequest, AnswerSet],
) -> np.ndarray:
    first = next(iter(oracle.values()))
    n_patterns = len(first.patterns)
    total = np.zeros(n_patterns)
    cells = np.zeros(n_patterns, dtype=int)
    for stat, truth in oracle.items():
        est = answers[stat]
        _check_aligned(est, truth)
        for p in range(n_patterns):
            for i in range(len(truth.epochs)):
                if not truth.present[p, i]:
                    continue
                cells[p] += 1
                if not est.present[p, i]:
                    total[p] = np.inf
                    continue
                t = truth.values[p, i]
                total[p] += abs(est.values[p, i] - t) / max(abs(t), _TINY)
    with np.errstate(invalid="ignore"):
        out = np.where(cells > 0, total / np.maximum(cells, 1), 0.0)
    return out


def calibrate_sampling(
    dataset: ZipfDataset,
    patterns: Sequence[tuple[int, ...]],
    queries: Sequence[FeatureQuery],
    delta: float,
    epsilon: float,
    rates: Sequence[float] = DEFAULT_RATE_GRID,
    oracle: BaselineResult | None = None,
) -> float:
    """Smallest rate in the grid for which at least a delta fraction of
    cohorts keeps mean relative error within epsilon. The full-rate sample
    is exact, so the search always terminates."""
    if not 0.0 < delta <= 1.0:
        raise SchemaError(f"delta must lie in (0, 1], got {delta}")
    if epsilon < 0:
        raise SchemaError(f"epsilon must be non-negative, got {epsilon}")
    if oracle is None:
        oracle = run_baseline("store_raw", dataset, patterns, queries)
    for rate in sorted(rates):
        result = run_baseline("sampling", dataset, patterns, queries, rate=rate)
        errors = _per_cohort_relative_error(result.answers, oracle.answers)
        qualified = float(np.mean(errors <= epsilon)) if errors.size else 1.0
        if qualified >= delta:
            return rate
    return float(max(rates))
