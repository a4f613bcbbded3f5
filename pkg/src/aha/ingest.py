"""Collapse one epoch's session batch into a table of per-leaf aggregates.

Only attribute tuples actually observed in the batch get a row, so the
table size tracks the number of active leaf groups, not the full
cross-product of attribute values. Grouping is a single-node in-memory
hash aggregation; an optional shard count splits the batch by key hash and
merges the shard tables at the end (legal because merge is a commutative
monoid), which is also how concurrent builders would combine results.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .aggregates import (
    HistogramSketch,
    HistogramSpec,
    MetricAggregate,
    PartialAggregate,
    merge,
)
from .errors import SchemaError, UnknownValueError
from .schema import (
    DatasetSchema,
    EpochId,
    SessionBatch,
    SessionRecord,
    leaf_fraction,
)


@dataclass(frozen=True)
class IngestConfig:
    """Ingest-time knobs shared by every epoch of a dataset.

    histograms maps metric name -> HistogramSpec; metrics not listed carry
    no sketch. closed_dictionaries makes unseen attribute values an error
    instead of growing the dictionary when decoding raw text input.
    """

    histograms: Mapping[str, HistogramSpec] = field(default_factory=dict)
    closed_dictionaries: bool = False
    shards: int = 1

    def specs_for(self, schema: DatasetSchema) -> tuple[HistogramSpec | None, ...]:
        unknown = set(self.histograms) - set(schema.metrics.names)
        if unknown:
            raise SchemaError(f"histogram config for unknown metrics {sorted(unknown)}")
        return tuple(
            self.histograms[name].validate() if name in self.histograms else None
            for name in schema.metrics.names
        )


@dataclass(frozen=True)
class LeafTable:
    """Per-epoch replay unit: one PartialAggregate per observed leaf tuple."""

    epoch: EpochId
    schema: DatasetSchema
    hist_specs: tuple[HistogramSpec | None, ...]
    rows: dict[tuple[int, ...], PartialAggregate]
    ingested_sessions: int
    rejected_sessions: int = 0

    @property
    def leaf_count(self) -> int:
        return len(self.rows)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, LeafTable)
            and self.epoch == other.epoch
            and self.schema == other.schema
            and self.hist_specs == other.hist_specs
            and self.rows == other.rows
            and self.ingested_sessions == other.ingested_sessions
            and self.rejected_sessions == other.rejected_sessions
        )


def _new_acc(specs: Sequence[HistogramSpec | None]) -> list[list]:
    # per metric: [count, sum, sum_sq, min, max, hist-counts or None]
    # hist-counts layout: [below, above, bucket_0 .. bucket_B-1]
    return [
        [0, 0.0, 0.0, math.inf, -math.inf, ([0] * (s.buckets + 2) if s else None)]
        for s in specs
    ]


def _freeze_acc(acc: list[list], specs: Sequence[HistogramSpec | None]) -> PartialAggregate:
    states = []
    for (count, total, total_sq, lo, hi, hist), spec in zip(acc, specs):
        sketch = None
        if spec is not None:
            sketch = HistogramSketch(spec.lo, spec.hi, tuple(hist[2:]), hist[0], hist[1])
        states.append(MetricAggregate(count, total, total_sq, lo, hi, sketch))
    return PartialAggregate(tuple(states))


def _accumulate(
    rows: dict[tuple[int, ...], list[list]],
    sessions: Iterable[SessionRecord],
    schema: DatasetSchema,
    specs: Sequence[HistogramSpec | None],
) -> tuple[int, int]:
    m = schema.attribute_count
    k = schema.metric_count
    cards = schema.attributes.cardinalities
    isfinite = math.isfinite
    accepted = rejected = 0
    for rec in sessions:
        codes = rec.attribute_codes
        values = rec.metric_values
        if len(codes) != m or len(values) != k:
            raise SchemaError(
                f"session has {len(codes)} codes / {len(values)} values, "
                f"schema expects {m} / {k}"
            )
        for i, c in enumerate(codes):
            if not 0 <= c < cards[i]:
                raise UnknownValueError(
                    f"attribute {schema.attributes.names[i]!r}: code {c} out of range"
                )
        ok = True
        for v in values:
            if not isfinite(v):
                ok = False
                break
        if not ok:
            rejected += 1
            continue
        accepted += 1
        acc = rows.get(codes)
        if acc is None:
            rows[codes] = acc = _new_acc(specs)
        for j, v in enumerate(values):
            a = acc[j]
            a[0] += 1
            a[1] += v
            a[2] += v * v
            if v < a[3]:
                a[3] = v
            if v > a[4]:
                a[4] = v
            hist = a[5]
            if hist is not None:
                spec = specs[j]
                if v < spec.lo:
                    hist[0] += 1
                elif v >= spec.hi:
                    hist[1] += 1
                else:
                    idx = int((v - spec.lo) / (spec.hi - spec.lo) * spec.buckets)
                    hist[2 + min(idx, spec.buckets - 1)] += 1
    return accepted, rejected


def ingest_epoch(
    schema: DatasetSchema,
    batch: SessionBatch,
    config: IngestConfig | None = None,
) -> LeafTable:
    """Group a batch by its full attribute tuple and aggregate each metric.

    Sessions carrying any non-finite metric are rejected as whole rows and
    counted in rejected_sessions; everything else lands in exactly one leaf
    row, so per-metric counts across rows always total ingested_sessions.
    The result is independent of session order.
    """
    config = config or IngestConfig()
    specs = config.specs_for(schema)

    if config.shards > 1:
        shard_rows: list[dict] = [{} for _ in range(config.shards)]
        shard_sessions: list[list[SessionRecord]] = [[] for _ in range(config.shards)]
        for rec in batch.sessions:
            shard_sessions[hash(rec.attribute_codes) % config.shards].append(rec)
        accepted = rejected = 0
        for rows, sessions in zip(shard_rows, shard_sessions):
            a, r = _accumulate(rows, sessions, schema, specs)
            accepted += a
            rejected += r
        frozen: dict[tuple[int, ...], PartialAggregate] = {}
        for rows in shard_rows:
            for key, acc in rows.items():
                agg = _freeze_acc(acc, specs)
                prev = frozen.get(key)
                frozen[key] = agg if prev is None else merge(prev, agg)
    else:
        raw: dict[tuple[int, ...], list[list]] = {}
        accepted, rejected = _accumulate(raw, batch.sessions, schema, specs)
        frozen = {key: _freeze_acc(acc, specs) for key, acc in raw.items()}

    return LeafTable(
        epoch=batch.epoch,
        schema=schema,
        hist_specs=specs,
        rows=frozen,
        ingested_sessions=accepted,
        rejected_sessions=rejected,
    )


def merge_tables(a: LeafTable, b: LeafTable) -> LeafTable:
    """Row-wise merge of two tables built over the same schema and config.

    This is the ingest-level face of self-decomposability: ingesting two
    sub-batches and merging equals ingesting their concatenation.
    """
    if a.schema != b.schema or a.hist_specs != b.hist_specs:
        raise SchemaError("cannot merge leaf tables with different schema or config")
    rows = dict(a.rows)
    for key, agg in b.rows.items():
        prev = rows.get(key)
        rows[key] = agg if prev is None else merge(prev, agg)
    return LeafTable(
        epoch=a.epoch,
        schema=a.schema,
        hist_specs=a.hist_specs,
        rows=rows,
        ingested_sessions=a.ingested_sessions + b.ingested_sessions,
        rejected_sessions=a.rejected_sessions + b.rejected_sessions,
    )


def observed_leaf_fraction(table: LeafTable) -> float:
    """Observed leaf rows over the possible leaf-tuple count."""
    return leaf_fraction(table.leaf_count, table.schema.attributes)


# ---------------------------------------------------------------------------
# Raw session input (CLI surface): headered CSV and line-delimited JSON.

def read_sessions_csv(
    lines: Iterable[str],
    schema: DatasetSchema,
    epoch: EpochId,
    closed_dictionaries: bool = False,
) -> SessionBatch:
    """Parse a headered CSV whose columns are the attributes then the metrics.

    Attribute text is dictionary-encoded in first-seen order; with closed
    dictionaries an unseen value is an error instead.
    """
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty session CSV (missing header)") from None
    return _batch_from_rows(reader, header, schema, epoch, closed_dictionaries)


def read_sessions_jsonl(
    lines: Iterable[str],
    schema: DatasetSchema,
    epoch: EpochId,
    closed_dictionaries: bool = False,
) -> SessionBatch:
    """Parse one JSON object per line with attribute and metric keys."""
    names = list(schema.attributes.names) + list(schema.metrics.names)
    rows: Iterator[list] = (
        [json.loads(line)[name] for name in names] for line in lines if line.strip()
    )
    return _batch_from_rows(rows, names, schema, epoch, closed_dictionaries)


def _batch_from_rows(
    rows: Iterable[Sequence],
    header: Sequence[str],
    schema: DatasetSchema,
    epoch: EpochId,
    closed_dictionaries: bool,
) -> SessionBatch:
    expected = list(schema.attributes.names) + list(schema.metrics.names)
    if list(header) != expected:
        raise SchemaError(f"input columns {list(header)} do not match schema {expected}")
    m = schema.attribute_count
    dicts = schema.attributes.dictionaries
    records = []
    for row in rows:
        if len(row) != len(expected):
            raise SchemaError(f"row has {len(row)} fields, expected {len(expected)}")
        if closed_dictionaries:
            codes = tuple(dicts[i].encode(str(row[i])) for i in range(m))
        else:
            codes = tuple(dicts[i].add(str(row[i])) for i in range(m))
        try:
            values = tuple(float(x) for x in row[m:])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad metric value in row {row!r}: {exc}") from None
        records.append(SessionRecord(codes, values))
    return SessionBatch(epoch=epoch, sessions=tuple(records))
