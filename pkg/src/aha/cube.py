"""Derive statistics for any cohort from leaf tables alone.

The full cube, selected grouping sets, single-pattern queries, and
time-range aggregation all work by merging stored leaf aggregates; raw
sessions are never touched. The cube processes grouping sets largest
first and aggregates each set from the smallest already-computed strict
superset instead of rescanning the leaves, which is where its speed
advantage over a per-set group-by loop comes from.

Result keys are selector tuples: a concrete code per grouped attribute and
WILDCARD (-1) elsewhere, so a key identifies both its cohort and its
grouping set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .aggregates import (
    HistogramSketch,
    HistogramSpec,
    MetricAggregate,
    PartialAggregate,
    StatisticRequest,
    finalize_metric,
)
from .errors import CapacityError, EpochRangeError, SchemaError
from .ingest import LeafTable
from .schema import (
    WILDCARD,
    CohortPattern,
    DatasetSchema,
    EpochId,
    enumerate_grouping_sets,
)

DEFAULT_MEMORY_BUDGET_BYTES = 4 << 30


@dataclass
class CubeResult:
    """Aggregates and finalized statistics for a family of grouping sets.

    Finalized values are materialized on first access and cached; the
    aggregation itself never depends on them.
    """

    epoch: EpochId
    schema: DatasetSchema
    stats: tuple[StatisticRequest, ...]
    grouping_sets: tuple[tuple[int, ...], ...]
    rows: dict[tuple[int, ...], PartialAggregate]
    _finalized: dict[tuple[int, ...], tuple[float, ...]] | None = None

    @property
    def finalized(self) -> dict[tuple[int, ...], tuple[float, ...]]:
        if self._finalized is None:
            self._finalized = _finalize_rows(self.rows, _resolve(self.stats, self.schema))
        return self._finalized

    def __len__(self) -> int:
        return len(self.rows)

    def pattern(self, key: tuple[int, ...]) -> CohortPattern:
        return CohortPattern(key)

    def keys_for_set(self, grouping_set: Sequence[int]) -> list[tuple[int, ...]]:
        wanted = set(grouping_set)
        return [
            key
            for key in self.rows
            if {i for i, s in enumerate(key) if s != WILDCARD} == wanted
        ]

    def same_rows(self, other: "CubeResult") -> bool:
        return self.rows == other.rows and self.finalized == other.finalized


@dataclass(frozen=True)
class EpochValue:
    """Finalized statistics of one cohort at one epoch; empty means the
    cohort had no sessions there."""

    epoch: EpochId
    empty: bool
    values: tuple[float, ...] | None
    count: int


# ---------------------------------------------------------------------------
# Group-reduce kernel over already-aggregated rows.

def _slots_from(agg: PartialAggregate) -> list[list]:
    metrics = agg.metrics
    if len(metrics) == 1 and metrics[0][5] is None:
        count, total, total_sq, lo, hi, _ = metrics[0]
        return [
            [
                count,
                total,
                total_sq,
                math.inf if lo is None else lo,
                -math.inf if hi is None else hi,
                None,
            ]
        ]
    slots = []
    for count, total, total_sq, lo, hi, hist in metrics:
        slots.append(
            [
                count,
                total,
                total_sq,
                math.inf if lo is None else lo,
                -math.inf if hi is None else hi,
                None if hist is None else [hist.below, hist.above, *hist.counts],
            ]
        )
    return slots


def _group_reduce(
    source: Iterable[tuple[tuple[int, ...], PartialAggregate]],
    positions: tuple[int, ...],
    m: int,
    hist_specs: Sequence[HistogramSpec | None],
) -> dict[tuple[int, ...], PartialAggregate]:
    """Merge source rows into one row per distinct projection onto positions.

    Groups fed by a single source row reuse that row's aggregate object
    outright (aggregates are immutable); only groups that actually combine
    rows pay for a mutable accumulator and a re-freeze.
    """
    k = len(hist_specs)
    acc: dict[tuple[int, ...], PartialAggregate | list] = {}
    template = [WILDCARD] * m
    get = acc.get
    for key, agg in source:
        for i in positions:
            template[i] = key[i]
        out = tuple(template)
        slots = get(out)
        if slots is None:
            acc[out] = agg
            for i in positions:
                template[i] = WILDCARD
            continue
        if type(slots) is not list:
            acc[out] = slots = _slots_from(slots)
        metrics = agg.metrics
        for j in range(k):
            count, total, total_sq, lo, hi, hist = metrics[j]
            a = slots[j]
            a[0] += count
            a[1] += total
            a[2] += total_sq
            if lo is not None and lo < a[3]:
                a[3] = lo
            if hi is not None and hi > a[4]:
                a[4] = hi
            if hist is not None:
                h = a[5]
                if h is None:
                    a[5] = [hist.below, hist.above, *hist.counts]
                else:
                    h[0] += hist.below
                    h[1] += hist.above
                    counts = hist.counts
                    for b in range(len(counts)):
                        h[b + 2] += counts[b]
        for i in positions:
            template[i] = WILDCARD
    return {
        key: value if type(value) is not list else _freeze(value, hist_specs)
        for key, value in acc.items()
    }


def _freeze(slots: list, hist_specs: Sequence[HistogramSpec | None]) -> PartialAggregate:
    if len(slots) == 1 and slots[0][5] is None:
        count, total, total_sq, lo, hi, _ = slots[0]
        if count:
            return PartialAggregate(
                (MetricAggregate(count, total, total_sq, lo, hi, None),)
            )
        return PartialAggregate((MetricAggregate(0, total, total_sq, None, None, None),))
    metrics = []
    for (count, total, total_sq, lo, hi, hist), spec in zip(slots, hist_specs):
        sketch = None
        if hist is not None and spec is not None:
            sketch = HistogramSketch(spec.lo, spec.hi, tuple(hist[2:]), hist[0], hist[1])
        metrics.append(
            MetricAggregate(
                count,
                total,
                total_sq,
                None if count == 0 else lo,
                None if count == 0 else hi,
                sketch,
            )
        )
    return PartialAggregate(tuple(metrics))


def _resolve(
    stats: Sequence[StatisticRequest], schema: DatasetSchema
) -> list[tuple[int, str, float | None]]:
    return [(req.metric_index(schema.metrics), req.kind, req.p) for req in stats]


def _compile_finalizer(idx: int, kind: str, p: float | None):
    # rows only hold non-empty cohorts, so count > 0 everywhere below
    if kind == "count":
        return lambda ms: float(ms[idx][0])
    if kind == "sum":
        return lambda ms: ms[idx][1]
    if kind == "mean":
        return lambda ms: ms[idx][1] / ms[idx][0]
    if kind == "min":
        return lambda ms: ms[idx][3]
    if kind == "max":
        return lambda ms: ms[idx][4]
    return lambda ms: finalize_metric(ms[idx], kind, p)


def _finalize_rows(
    rows: dict[tuple[int, ...], PartialAggregate],
    resolved: list[tuple[int, str, float | None]],
) -> dict[tuple[int, ...], tuple[float, ...]]:
    if not resolved:
        return {}
    finalizers = [_compile_finalizer(idx, kind, p) for idx, kind, p in resolved]
    if len(finalizers) == 1:
        f = finalizers[0]
        return {key: (f(agg.metrics),) for key, agg in rows.items()}
    return {
        key: tuple(f(agg.metrics) for f in finalizers) for key, agg in rows.items()
    }


def _estimate_cube_bytes(table: LeafTable, sets: Sequence[tuple[int, ...]]) -> int:
    cards = table.schema.attributes.cardinalities
    m = table.schema.attribute_count
    k = table.schema.metric_count
    hist_cost = sum(
        16 * (spec.buckets + 2) + 80 for spec in table.hist_specs if spec is not None
    )
    row_bytes = 160 + 40 * m + 260 * k + hist_cost
    total_rows = 0
    for s in sets:
        bound = 1
        for i in s:
            bound *= cards[i]
            if bound > table.leaf_count:
                break
        total_rows += min(bound, table.leaf_count) if s else 1
    return total_rows * row_bytes


def _check_sets(sets: Sequence[Sequence[int]], m: int) -> list[tuple[int, ...]]:
    seen: set[tuple[int, ...]] = set()
    out: list[tuple[int, ...]] = []
    for s in sets:
        t = tuple(sorted(set(s)))
        for i in t:
            if not 0 <= i < m:
                raise SchemaError(f"grouping set {tuple(s)} has invalid attribute index {i}")
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


# ---------------------------------------------------------------------------
# Cube and grouping-set operations.

def cube(
    table: LeafTable,
    stats: Sequence[StatisticRequest] = (),
    memory_budget_bytes: int = DEFAULT_MEMORY_BUDGET_BYTES,
    max_attributes: int | None = None,
) -> CubeResult:
    """One row per non-empty cohort across all 2^M grouping sets.

    Cohorts with no matching leaves are absent, never zero-filled. The
    estimated result size is checked against the memory budget up front;
    oversized requests fail with a capacity error that points at
    grouping_sets() instead of spilling.
    """
    kwargs = {} if max_attributes is None else {"max_attributes": max_attributes}
    sets = enumerate_grouping_sets(table.schema.attributes, **kwargs)
    estimate = _estimate_cube_bytes(table, sets)
    if estimate > memory_budget_bytes:
        raise CapacityError(
            f"full cube estimated at {estimate / 2**30:.1f} GiB exceeds the "
            f"{memory_budget_bytes / 2**30:.1f} GiB budget; use grouping_sets() "
            "with the sets you need"
        )
    m = table.schema.attribute_count

    # Largest sets first so every strict superset of a set is already done.
    by_set: dict[tuple[int, ...], dict[tuple[int, ...], PartialAggregate]] = {}
    full = tuple(range(m))
    for s in reversed(sets):
        if s == full:
            # Grouping by every attribute is the leaf table itself; the
            # result is read-only, so no copy is needed.
            by_set[s] = table.rows
            continue
        parent_rows = None
        best = None
        for extra in range(m):
            if extra in s:
                continue
            candidate = tuple(sorted((*s, extra)))
            rows = by_set.get(candidate)
            if rows is not None and (best is None or len(rows) < best):
                best = len(rows)
                parent_rows = rows
        if parent_rows is None:
            parent_rows = by_set[full] if full in by_set else table.rows
        by_set[s] = _group_reduce(parent_rows.items(), s, m, table.hist_specs)

    rows: dict[tuple[int, ...], PartialAggregate] = {}
    for s in sets:
        rows.update(by_set[s])
    return CubeResult(
        epoch=table.epoch,
        schema=table.schema,
        stats=tuple(stats),
        grouping_sets=tuple(sets),
        rows=rows,
    )


def grouping_sets(
    table: LeafTable,
    sets: Sequence[Sequence[int]],
    stats: Sequence[StatisticRequest] = (),
) -> CubeResult:
    """Rows for the requested attribute subsets only; duplicates are
    deduplicated silently. Agrees row-for-row with the matching cube slice."""
    chosen = _check_sets(sets, table.schema.attribute_count)
    m = table.schema.attribute_count
    rows: dict[tuple[int, ...], PartialAggregate] = {}
    for s in chosen:
        rows.update(_group_reduce(table.rows.items(), s, m, table.hist_specs))
    return CubeResult(
        epoch=table.epoch,
        schema=table.schema,
        stats=tuple(stats),
        grouping_sets=tuple(chosen),
        rows=rows,
    )


def naive_groupby_loop(
    table: LeafTable,
    stats: Sequence[StatisticRequest] = (),
    max_attributes: int | None = None,
) -> CubeResult:
    """Same output as cube(), built as one independent pass over the leaves
    per grouping set. Exists as the correctness and speed foil for cube()."""
    kwargs = {} if max_attributes is None else {"max_attributes": max_attributes}
    sets = enumerate_grouping_sets(table.schema.attributes, **kwargs)
    m = table.schema.attribute_count
    rows: dict[tuple[int, ...], PartialAggregate] = {}
    for s in sets:
        rows.update(_group_reduce(table.rows.items(), s, m, table.hist_specs))
    return CubeResult(
        epoch=table.epoch,
        schema=table.schema,
        stats=tuple(stats),
        grouping_sets=tuple(sets),
        rows=rows,
    )


# ---------------------------------------------------------------------------
# Pattern queries.

def aggregate_for_pattern(table: LeafTable, pattern: CohortPattern) -> PartialAggregate | None:
    """Merge of all leaf rows matching the pattern; None when none match."""
    pattern.validate(table.schema.attributes)
    concrete = [(i, s) for i, s in enumerate(pattern.selectors) if s != WILDCARD]
    acc: PartialAggregate | None = None
    merged_slots = None
    m = table.schema.attribute_count
    k = table.schema.metric_count
    for key, agg in table.rows.items():
        for i, code in concrete:
            if key[i] != code:
                break
        else:
            if merged_slots is None:
                merged_slots = [
                    [0, 0.0, 0.0, math.inf, -math.inf, None] for _ in range(k)
                ]
            for j in range(k):
                count, total, total_sq, lo, hi, hist = agg.metrics[j]
                a = merged_slots[j]
                a[0] += count
                a[1] += total
                a[2] += total_sq
                if lo is not None and lo < a[3]:
                    a[3] = lo
                if hi is not None and hi > a[4]:
                    a[4] = hi
                if hist is not None:
                    h = a[5]
                    if h is None:
                        a[5] = [hist.below, hist.above, *hist.counts]
                    else:
                        h[0] += hist.below
                        h[1] += hist.above
                        for b, c in enumerate(hist.counts):
                            h[b + 2] += c
    if merged_slots is None:
        return None
    return _freeze(merged_slots, table.hist_specs)


def query_pattern(
    tables: Sequence[LeafTable],
    pattern: CohortPattern,
    stats: Sequence[StatisticRequest],
) -> list[EpochValue]:
    """Per-epoch finalized statistics for one cohort.

    Epochs where the cohort has no sessions are flagged empty rather than
    imputed; callers decide how to treat gaps.
    """
    out = []
    for table in tables:
        resolved = _resolve(stats, table.schema)
        agg = aggregate_for_pattern(table, pattern)
        if agg is None or agg.is_empty:
            out.append(EpochValue(table.epoch, True, None, 0))
        else:
            values = tuple(
                finalize_metric(agg.metrics[idx], kind, p) for idx, kind, p in resolved
            )
            out.append(EpochValue(table.epoch, False, values, agg.count))
    return out


def query_pattern_over_time(
    tables: Sequence[LeafTable],
    pattern: CohortPattern,
    stats: Sequence[StatisticRequest],
    t1: int,
    t2: int,
) -> EpochValue:
    """Merge the cohort's aggregates across every epoch in [t1, t2], then
    finalize once. Valid because epochs partition sessions disjointly."""
    if t1 > t2:
        raise EpochRangeError(f"from epoch {t1} > to epoch {t2}")
    merged: PartialAggregate | None = None
    schema: DatasetSchema | None = None
    for table in tables:
        if not t1 <= table.epoch.index <= t2:
            continue
        schema = table.schema
        agg = aggregate_for_pattern(table, pattern)
        if agg is None:
            continue
        merged = agg if merged is None else merged.merge(agg)
    epoch = EpochId(t1)
    if merged is None or merged.is_empty or schema is None:
        return EpochValue(epoch, True, None, 0)
    resolved = _resolve(stats, schema)
    values = tuple(
        finalize_metric(merged.metrics[idx], kind, p) for idx, kind, p in resolved
    )
    return EpochValue(epoch, False, values, merged.count)


# ---------------------------------------------------------------------------
# CSV rendering of cube results (CLI surface).

def cube_csv(result: CubeResult) -> str:
    """One column per attribute (literal ``*`` for wildcards), then one
    column per finalized statistic. Rows are grouped by grouping set in
    subset-before-superset order, keys sorted within each set."""
    schema = result.schema
    header = list(schema.attributes.names) + [req.render() for req in result.stats]
    lines = [",".join(header)]
    for s in result.grouping_sets:
        for key in sorted(result.keys_for_set(s)):
            cells = [
                "*" if sel == WILDCARD else schema.attributes.dictionaries[i].decode(sel)
                for i, sel in enumerate(key)
            ]
            cells += [repr(v) for v in result.finalized[key]]
            lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
