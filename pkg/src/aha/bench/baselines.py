"""Baseline solutions the harness compares: raw storage with brute-force
queries, a materialize-every-cohort key-value store, uniform sampling with
inverse-probability estimates, and the leaf-summary engine itself.

store_raw doubles as the correctness oracle: its answers come straight
from session arrays with direct statistic formulas and never touch the
mergeable-aggregate machinery. Query sets are restricted to statistics
whose answers are exactly representable (count, sum, mean, min, max) so
strong-equivalence solutions can be compared bit for bit; variance paths
are exercised by the engine-level suites with a relative tolerance.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import zstd
from ..aggregates import StatisticRequest
from ..cube import cube
from ..errors import SchemaError
from ..ingest import ingest_epoch
from ..schema import WILDCARD
from ..store import serialize_leaf_csv
from .synth import ZipfDataset

BASELINE_KINDS = ("store_raw", "key_value_store", "sampling", "aha")

#: Statistics the benchmark queries may use (exact for every strong solution).
BENCH_STAT_KINDS = ("count", "sum", "mean", "min", "max")


@dataclass(frozen=True)
class FeatureQuery:
    """One benchmark query: a statistic answered for every pattern/epoch."""

    stat: StatisticRequest

    def __post_init__(self):
        if self.stat.kind not in BENCH_STAT_KINDS:
            raise SchemaError(
                f"benchmark queries support {BENCH_STAT_KINDS}, got {self.stat.kind!r}"
            )


@dataclass
class AnswerSet:
    """Answers for one query, aligned as patterns x epochs."""

    stat: StatisticRequest
    patterns: tuple[tuple[int, ...], ...]
    epochs: tuple[int, ...]
    values: np.ndarray  # (P, E) float64, NaN where absent
    present: np.ndarray  # (P, E) bool

    def series(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        return self.values[p], self.present[p]


@dataclass
class BaselineResult:
    kind: str
    answers: dict[StatisticRequest, AnswerSet]
    ingest_seconds: float
    query_seconds: float
    stored_bytes: int


def observed_cohorts(dataset: ZipfDataset, max_patterns: int | None = None) -> list[tuple[int, ...]]:
    """Every cohort pattern with at least one session in some epoch.

    Enumerated from the raw arrays (distinct leaves and their
    generalizations), so the query universe is engine-independent.
    """
    m = dataset.schema.attribute_count
    subsets = [s for size in range(m + 1) for s in itertools.combinations(range(m), size)]
    out: set[tuple[int, ...]] = set()
    for frame in dataset.frames:
        if len(frame) == 0:
            continue
        leaves = np.unique(frame.codes, axis=0)
        for leaf in map(tuple, leaves):
            for s in subsets:
                key = tuple(leaf[i] if i in s else WILDCARD for i in range(m))
                out.add(key)
    ordered = sorted(out)
    if max_patterns is not None and len(ordered) > max_patterns:
        rng = np.random.default_rng(dataset.config.seed)
        idx = rng.choice(len(ordered), size=max_patterns, replace=False)
        ordered = [ordered[i] for i in sorted(idx)]
    return ordered


# ---------------------------------------------------------------------------
# Direct statistic evaluation over session arrays (the oracle path).

def _stat_from_values(values: np.ndarray, kind: str) -> float:
    if kind == "count":
        return float(values.size)
    if kind == "sum":
        return float(np.sum(values))
    if kind == "mean":
        return float(np.sum(values) / values.size)
    if kind == "min":
        return float(np.min(values))
    if kind == "max":
        return float(np.max(values))
    raise SchemaError(f"unsupported benchmark statistic {kind!r}")


def _scaled_stat(values: np.ndarray, kind: str, rate: float) -> float:
    """Inverse-probability estimate from a uniform sample at the given rate."""
    if kind == "count":
        return float(values.size / rate)
    if kind == "sum":
        return float(np.sum(values) / rate)
    # mean is a ratio: the scaling cancels; extremes are never scaled
    return _stat_from_values(values, kind)


def _pattern_mask(codes: np.ndarray, pattern: tuple[int, ...]) -> np.ndarray:
    mask = np.ones(codes.shape[0], dtype=bool)
    for i, sel in enumerate(pattern):
        if sel != WILDCARD:
            mask &= codes[:, i] == sel
    return mask


def _scan_answers(
    dataset_frames,
    patterns: Sequence[tuple[int, ...]],
    stats: Sequence[StatisticRequest],
    metric_index,
    rate: float | None = None,
) -> dict[StatisticRequest, AnswerSet]:
    epochs = tuple(frame.epoch.index for frame in dataset_frames)
    shape = (len(patterns), len(epochs))
    results = {
        stat: AnswerSet(
            stat,
            tuple(patterns),
            epochs,
            np.full(shape, np.nan),
            np.zeros(shape, dtype=bool),
        )
        for stat in stats
    }
    for e, frame in enumerate(dataset_frames):
        codes = frame.codes
        for p, pattern in enumerate(patterns):
            mask = _pattern_mask(codes, pattern)
            if not mask.any():
                continue
            for stat in stats:
                values = frame.values[mask, metric_index(stat)]
                if rate is None:
                    out = _stat_from_values(values, stat.kind)
                else:
                    out = _scaled_stat(values, stat.kind, rate)
                results[stat].values[p, e] = out
                results[stat].present[p, e] = True
    return results


# ---------------------------------------------------------------------------
# Solutions.

def _run_store_raw(dataset, patterns, stats, metric_index) -> BaselineResult:
    t0 = time.perf_counter()
    stored = len(zstd.compress(dataset.raw_csv_text().encode()))
    ingest_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    answers = _scan_answers(dataset.frames, patterns, stats, metric_index)
    query_seconds = time.perf_counter() - t0
    return BaselineResult("store_raw", answers, ingest_seconds, query_seconds, stored)


def _run_sampling(dataset, patterns, stats, metric_index, rate: float) -> BaselineResult:
    if not 0.0 < rate <= 1.0:
        raise SchemaError(f"sampling rate must lie in (0, 1], got {rate}")
    rng = np.random.default_rng([dataset.config.seed, int(round(rate * 1_000_000)), 77])

    t0 = time.perf_counter()
    sampled = []
    text_parts = []
    for frame in dataset.frames:
        n = len(frame)
        take = int(round(rate * n))
        idx = np.sort(rng.choice(n, size=take, replace=False)) if take < n else np.arange(n)
        sub = type(frame)(frame.epoch, frame.codes[idx], frame.values[idx])
        sampled.append(sub)
        for row, vals in zip(sub.codes, sub.values):
            text_parts.append(
                ",".join(str(int(c)) for c in row)
                + ","
                + ",".join(repr(float(v)) for v in vals)
            )
    stored = len(zstd.compress("\n".join(text_parts).encode()))
    ingest_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    answers = _scan_answers(sampled, patterns, stats, metric_index, rate=rate)
    query_seconds = time.perf_counter() - t0
    return BaselineResult("sampling", answers, ingest_seconds, query_seconds, stored)


def _run_key_value_store(dataset, patterns, stats, metric_index) -> BaselineResult:
    m = dataset.schema.attribute_count
    k = dataset.schema.metric_count
    subsets = [s for size in range(m + 1) for s in itertools.combinations(range(m), size)]

    t0 = time.perf_counter()
    maps: list[dict[tuple[int, ...], list[list]]] = []
    for frame in dataset.frames:
        table: dict[tuple[int, ...], list[list]] = {}
        get = table.get
        for row, vals in zip(frame.codes, frame.values):
            leaf = tuple(int(c) for c in row)
            for s in subsets:
                key = tuple(leaf[i] if i in s else WILDCARD for i in range(m))
                acc = get(key)
                if acc is None:
                    table[key] = acc = [
                        [0, 0.0, 0.0, math.inf, -math.inf] for _ in range(k)
                    ]
                for j in range(k):
                    v = vals[j]
                    a = acc[j]
                    a[0] += 1
                    a[1] += v
                    a[2] += v * v
                    if v < a[3]:
                        a[3] = v
                    if v > a[4]:
                        a[4] = v
        maps.append(table)
    lines = []
    for table in maps:
        for key, acc in table.items():
            cells = [str(c) for c in key]
            for a in acc:
                cells += [str(a[0]), repr(a[1]), repr(a[2]), repr(a[3]), repr(a[4])]
            lines.append(",".join(cells))
    stored = len(zstd.compress("\n".join(lines).encode()))
    ingest_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    epochs = tuple(frame.epoch.index for frame in dataset.frames)
    shape = (len(patterns), len(epochs))
    answers = {
        stat: AnswerSet(
            stat, tuple(patterns), epochs, np.full(shape, np.nan), np.zeros(shape, dtype=bool)
        )
        for stat in stats
    }
    for e, table in enumerate(maps):
        for p, pattern in enumerate(patterns):
            acc = table.get(pattern)
            if acc is None:
                continue
            for stat in stats:
                a = acc[metric_index(stat)]
                kind = stat.kind
                if kind == "count":
                    out = float(a[0])
                elif kind == "sum":
                    out = a[1]
                elif kind == "mean":
                    out = a[1] / a[0]
                elif kind == "min":
                    out = a[3]
                else:
                    out = a[4]
                answers[stat].values[p, e] = out
                answers[stat].present[p, e] = True
    query_seconds = time.perf_counter() - t0
    return BaselineResult("key_value_store", answers, ingest_seconds, query_seconds, stored)


def _run_aha(dataset, patterns, stats, metric_index) -> BaselineResult:
    t0 = time.perf_counter()
    tables = []
    stored = 0
    for batch in dataset.batches():
        table = ingest_epoch(dataset.schema, batch)
        tables.append(table)
        stored += len(zstd.compress(serialize_leaf_csv(table)))
    ingest_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    epochs = tuple(t.epoch.index for t in tables)
    shape = (len(patterns), len(epochs))
    answers = {
        stat: AnswerSet(
            stat, tuple(patterns), epochs, np.full(shape, np.nan), np.zeros(shape, dtype=bool)
        )
        for stat in stats
    }
    for e, table in enumerate(tables):
        rolled = cube(table)
        for p, pattern in enumerate(patterns):
            agg = rolled.rows.get(pattern)
            if agg is None:
                continue
            for stat in stats:
                ma = agg.metrics[metric_index(stat)]
                kind = stat.kind
                if kind == "count":
                    out = float(ma.count)
                elif kind == "sum":
                    out = ma.sum
                elif kind == "mean":
                    out = ma.sum / ma.count
                elif kind == "min":
                    out = ma.min
                else:
                    out = ma.max
                answers[stat].values[p, e] = out
                answers[stat].present[p, e] = True
    query_seconds = time.perf_counter() - t0
    return BaselineResult("aha", answers, ingest_seconds, query_seconds, stored)


def run_baseline(
    kind: str,
    dataset: ZipfDataset,
    patterns: Sequence[tuple[int, ...]],
    queries: Sequence[FeatureQuery],
    rate: float | None = None,
) -> BaselineResult:
    """Answer every query for every (pattern, epoch) cell and measure the
    solution's ingest time, query time, and stored bytes."""
    if kind not in BASELINE_KINDS:
        raise SchemaError(f"unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")
    stats = [q.stat for q in queries]
    metrics = dataset.schema.metrics

    def metric_index(stat: StatisticRequest) -> int:
        return stat.metric_index(metrics)

    if kind == "store_raw":
        return _run_store_raw(dataset, patterns, stats, metric_index)
    if kind == "sampling":
        if rate is None:
            raise SchemaError("sampling needs a rate in (0, 1]")
        return _run_sampling(dataset, patterns, stats, metric_index, rate)
    if kind == "key_value_store":
        return _run_key_value_store(dataset, patterns, stats, metric_index)
    return _run_aha(dataset, patterns, stats, metric_index)
