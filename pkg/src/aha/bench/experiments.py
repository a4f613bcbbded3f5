"""Benchmark suites: accuracy/cost comparison, attribute scaling, cube vs
per-set group-by timing, parallel-workload scaling, and the sparsity trend.

Each suite writes one CSV into the output directory and returns a summary
dict. A wall-clock budget aborts long suites with whatever cells finished;
partial outputs are flagged both in the summary and with a marker file.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

try:
    import tomli
except ImportError:  # pragma: no cover - tomllib ships with 3.11+
    import tomllib as tomli

from ..aggregates import StatisticRequest
from ..cube import cube, naive_groupby_loop
from ..detectors import DetectorConfig
from ..errors import SchemaError
from ..ingest import ingest_epoch
from .baselines import FeatureQuery, observed_cohorts, run_baseline
from .cost import SolutionCost, normalize_costs
from .scoring import score_accuracy
from .synth import ZipfConfig, generate_zipf, unique_leaf_ratio

SUITES = ("accuracy_cost", "attribute_scaling", "cube_speed", "workload_scaling", "sparsity")

#: Speedup range reported by large production-scale engines for the same
#: cube-vs-repeated-group-by comparison; printed for context, never gated.
REFERENCE_CUBE_SPEEDUP_RANGE = "3x-14x"


@dataclass(frozen=True)
class BenchConfig:
    """Suite knobs; the workload block mirrors ZipfConfig fields."""

    workload: ZipfConfig = ZipfConfig(
        attributes=4,
        values_per_attribute=6,
        alpha=1.1,
        sessions_per_epoch=15_000,
        epochs=6,
        metric_count=1,
        anomaly_probability=0.04,
        anomaly_magnitude=60.0,
        seed=7,
    )
    sampling_rate: float = 0.10
    max_patterns: int = 3000
    max_seconds: float = 600.0
    detector_window: int = 3
    cube_speed: ZipfConfig = ZipfConfig(
        attributes=6,
        values_per_attribute=10,
        alpha=1.1,
        sessions_per_epoch=200_000,
        epochs=1,
        seed=11,
    )
    attribute_counts: tuple[int, ...] = (2, 3, 4, 5, 6)
    scaling_sessions: int = 6000
    scaling_epochs: int = 4
    pipeline_counts: tuple[int, ...] = (1, 2, 4)
    sparsity: ZipfConfig = ZipfConfig(
        attributes=4,
        values_per_attribute=50,
        alpha=1.2,
        sessions_per_epoch=0,
        epochs=1,
        seed=0,
    )
    sparsity_sizes: tuple[int, ...] = (1_000, 10_000, 100_000, 1_000_000)
    sparsity_seeds: int = 5

    @classmethod
    def from_toml(cls, path: str | Path) -> "BenchConfig":
        with open(path, "rb") as f:
            doc = tomli.load(f)
        config = cls()
        if "workload" in doc:
            config = replace(config, workload=ZipfConfig(**doc["workload"]))
        if "cube_speed" in doc:
            config = replace(config, cube_speed=ZipfConfig(**doc["cube_speed"]))
        if "sparsity" in doc:
            sparsity = dict(doc["sparsity"])
            sizes = sparsity.pop("sample_sizes", None)
            seeds = sparsity.pop("seeds", None)
            if sparsity:
                base = {"sessions_per_epoch": 0, "epochs": 1}
                base.update(sparsity)
                config = replace(config, sparsity=ZipfConfig(**base))
            if sizes is not None:
                config = replace(config, sparsity_sizes=tuple(int(s) for s in sizes))
            if seeds is not None:
                config = replace(config, sparsity_seeds=int(seeds))
        suite = doc.get("suite", {})
        for key in ("sampling_rate", "max_patterns", "max_seconds", "detector_window"):
            if key in suite:
                config = replace(config, **{key: suite[key]})
        if "attribute_counts" in suite:
            config = replace(config, attribute_counts=tuple(suite["attribute_counts"]))
        if "pipeline_counts" in suite:
            config = replace(config, pipeline_counts=tuple(suite["pipeline_counts"]))
        return config


class _Budget:
    def __init__(self, seconds: float):
        self.deadline = time.monotonic() + seconds
        self.exceeded = False

    def check(self) -> bool:
        """True while time remains; flips exceeded once the budget is spent."""
        if time.monotonic() > self.deadline:
            self.exceeded = True
        return not self.exceeded


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _default_queries() -> list[FeatureQuery]:
    return [
        FeatureQuery(StatisticRequest("mean", "m0")),
        FeatureQuery(StatisticRequest("sum", "m0")),
        FeatureQuery(StatisticRequest("max", "m0")),
        FeatureQuery(StatisticRequest("count", "m0")),
    ]


def _default_detectors(window: int) -> list[DetectorConfig]:
    feature = StatisticRequest("mean", "m0")
    return [
        DetectorConfig(kind="three_sigma", feature=feature, window=window, min_history=2),
        DetectorConfig(
            kind="knn", feature=feature, window=window, knn_k=1, knn_tau=25.0, min_history=2
        ),
    ]


def run_accuracy_cost(config: BenchConfig, out_dir: Path, budget: _Budget) -> dict:
    dataset = generate_zipf(config.workload)
    patterns = observed_cohorts(dataset, config.max_patterns)
    queries = _default_queries()
    detectors = _default_detectors(config.detector_window)

    oracle = run_baseline("store_raw", dataset, patterns, queries)
    results = {"store_raw": oracle}
    for kind in ("aha", "key_value_store", "sampling"):
        if not budget.check():
            break
        rate = config.sampling_rate if kind == "sampling" else None
        results[kind] = run_baseline(kind, dataset, patterns, queries, rate=rate)

    costs = {
        kind: SolutionCost(kind, r.ingest_seconds + r.query_seconds, r.stored_bytes)
        for kind, r in results.items()
    }
    normalized = normalize_costs(costs)
    rows = []
    summary: dict = {"suite": "accuracy_cost", "solutions": {}}
    for kind, result in results.items():
        report = score_accuracy(result, oracle, detectors)
        cost = costs[kind]
        rows.append(
            [
                kind,
                f"{result.ingest_seconds:.6f}",
                f"{result.query_seconds:.6f}",
                result.stored_bytes,
                f"{cost.compute_hours:.9f}",
                f"{cost.storage_gb_months:.9f}",
                f"{cost.dollars:.9f}",
                f"{normalized[kind]:.6f}",
                f"{report.metric_mean:.6f}",
                f"{report.metric_p10:.6f}",
                f"{report.task_mean:.6f}",
                f"{report.task_p10:.6f}",
            ]
        )
        summary["solutions"][kind] = {
            "normalized_cost": normalized[kind],
            **report.summary(),
        }
    _write_csv(
        out_dir / "accuracy_cost.csv",
        [
            "solution", "ingest_seconds", "query_seconds", "stored_bytes",
            "compute_hours", "storage_gb_months", "dollars", "normalized_cost",
            "metric_accuracy_mean", "metric_accuracy_p10",
            "task_accuracy_mean", "task_accuracy_p10",
        ],
        rows,
    )
    return summary


def run_attribute_scaling(config: BenchConfig, out_dir: Path, budget: _Budget) -> dict:
    rows = []
    summary: dict = {"suite": "attribute_scaling", "cells": []}
    queries = _default_queries()
    detectors = _default_detectors(config.detector_window)
    for m in config.attribute_counts:
        if not budget.check():
            break
        workload = replace(
            config.workload,
            attributes=m,
            sessions_per_epoch=config.scaling_sessions,
            epochs=config.scaling_epochs,
        )
        dataset = generate_zipf(workload)
        patterns = observed_cohorts(dataset, config.max_patterns)
        oracle = run_baseline("store_raw", dataset, patterns, queries)
        for kind in ("aha", "sampling"):
            rate = config.sampling_rate if kind == "sampling" else None
            result = run_baseline(kind, dataset, patterns, queries, rate=rate)
            report = score_accuracy(result, oracle, detectors)
            cost = SolutionCost(kind, result.ingest_seconds + result.query_seconds, result.stored_bytes)
            rows.append(
                [
                    m, kind, len(patterns),
                    f"{report.metric_mean:.6f}", f"{report.task_mean:.6f}",
                    f"{report.metric_p10:.6f}", f"{report.task_p10:.6f}",
                    f"{cost.dollars:.9f}",
                ]
            )
            summary["cells"].append(
                {"attributes": m, "solution": kind, "task_accuracy_mean": report.task_mean,
                 "metric_accuracy_mean": report.metric_mean}
            )
    _write_csv(
        out_dir / "attribute_scaling.csv",
        ["attributes", "solution", "patterns", "metric_accuracy_mean",
         "task_accuracy_mean", "metric_accuracy_p10", "task_accuracy_p10", "dollars"],
        rows,
    )
    return summary


def run_cube_speed(config: BenchConfig, out_dir: Path, budget: _Budget) -> dict:
    dataset = generate_zipf(config.cube_speed)
    [batch] = dataset.batches()
    table = ingest_epoch(dataset.schema, batch)
    stats = [StatisticRequest("mean", "m0")]

    # warm both paths on a small prefix so timing excludes first-call costs
    small = ingest_epoch(
        dataset.schema,
        type(batch)(batch.epoch, batch.sessions[:1000]),
    )
    cube(small, stats)
    naive_groupby_loop(small, stats)

    import gc

    # best-of-N wall clock for each side, interleaved, to damp scheduler noise
    repeats = 3
    cube_seconds = naive_seconds = math.inf
    rolled = naive = None
    for _ in range(repeats):
        gc.collect()
        t0 = time.perf_counter()
        rolled = cube(table, stats)
        cube_seconds = min(cube_seconds, time.perf_counter() - t0)
        gc.collect()
        t0 = time.perf_counter()
        naive = naive_groupby_loop(table, stats)
        naive_seconds = min(naive_seconds, time.perf_counter() - t0)

    identical = rolled.same_rows(naive)
    speedup = naive_seconds / cube_seconds if cube_seconds > 0 else float("inf")
    _write_csv(
        out_dir / "cube_speed.csv",
        ["sessions", "leaf_count", "result_rows", "cube_seconds", "naive_seconds",
         "speedup", "outputs_identical", "reference_range"],
        [[
            len(batch), table.leaf_count, len(rolled), f"{cube_seconds:.6f}",
            f"{naive_seconds:.6f}", f"{speedup:.3f}", identical,
            REFERENCE_CUBE_SPEEDUP_RANGE,
        ]],
    )
    return {
        "suite": "cube_speed",
        "speedup": speedup,
        "cube_seconds": cube_seconds,
        "naive_seconds": naive_seconds,
        "outputs_identical": identical,
        "leaf_count": table.leaf_count,
    }


def run_workload_scaling(config: BenchConfig, out_dir: Path, budget: _Budget) -> dict:
    rows = []
    summary: dict = {"suite": "workload_scaling", "cells": []}
    queries = _default_queries()
    for pipelines in config.pipeline_counts:
        if not budget.check():
            break
        total_seconds = 0.0
        total_bytes = 0
        for p in range(pipelines):
            workload = replace(config.workload, seed=config.workload.seed + 1000 * p)
            dataset = generate_zipf(workload)
            patterns = observed_cohorts(dataset, config.max_patterns)
            result = run_baseline("aha", dataset, patterns, queries)
            total_seconds += result.ingest_seconds + result.query_seconds
            total_bytes += result.stored_bytes
        cost = SolutionCost("aha", total_seconds, total_bytes)
        rows.append([pipelines, f"{total_seconds:.6f}", total_bytes, f"{cost.dollars:.9f}"])
        summary["cells"].append({"pipelines": pipelines, "dollars": cost.dollars})
    _write_csv(
        out_dir / "workload_scaling.csv",
        ["pipelines", "total_seconds", "total_bytes", "dollars"],
        rows,
    )
    return summary


def run_sparsity(config: BenchConfig, out_dir: Path, budget: _Budget) -> dict:
    rows = []
    trend: dict[int, list[float]] = {}
    for seed in range(config.sparsity_seeds):
        for size in config.sparsity_sizes:
            if not budget.check():
                break
            workload = replace(
                config.sparsity, sessions_per_epoch=int(size), epochs=1,
                seed=config.sparsity.seed + seed,
            )
            dataset = generate_zipf(workload)
            frame = dataset.frames[0]
            distinct = frame.distinct_leaves()
            ratio = unique_leaf_ratio(frame)
            possible = config.sparsity.values_per_attribute ** config.sparsity.attributes
            rows.append(
                [size, seed, distinct, f"{ratio:.8f}", f"{distinct / possible:.10f}"]
            )
            trend.setdefault(int(size), []).append(ratio)
    _write_csv(
        out_dir / "sparsity.csv",
        ["sample_size", "seed", "distinct_leaves", "leaf_per_session_ratio",
         "fraction_of_possible_leaves"],
        rows,
    )
    means = {size: float(np.mean(vals)) for size, vals in trend.items()}
    return {"suite": "sparsity", "mean_ratio_by_size": means}


def run_experiments(suite: str, config: BenchConfig, out_dir: str | Path) -> dict:
    """Run one suite, write its CSV, and return a summary.

    On budget exhaustion the partial flag is set and a marker file is left
    next to the CSV so downstream tooling cannot mistake it for a full run.
    """
    if suite not in SUITES:
        raise SchemaError(f"unknown suite {suite!r}; expected one of {SUITES}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    budget = _Budget(config.max_seconds)
    runner = {
        "accuracy_cost": run_accuracy_cost,
        "attribute_scaling": run_attribute_scaling,
        "cube_speed": run_cube_speed,
        "workload_scaling": run_workload_scaling,
        "sparsity": run_sparsity,
    }[suite]
    summary = runner(config, out_dir, budget)
    summary["partial"] = budget.exceeded
    if budget.exceeded:
        (out_dir / f"{suite}.PARTIAL").write_text(
            "time budget exceeded; results cover only the finished cells\n"
        )
    return summary
