"""Mergeable per-metric aggregate states and their combining algebra.

A row of the leaf table stores, per metric, the tuple (count, sum, sum_sq,
min, max) plus an optional fixed-width histogram. These states form a
commutative monoid under ``merge`` with the empty state as identity, which
is what makes any disjoint regrouping of sessions (across attributes or
across epochs) reproduce the direct statistic.

Variance is population variance (divide by n): it composes cleanly from
(count, sum, sum_sq) and is clamped at zero to absorb floating-point
cancellation. Quantiles are estimated from the histogram sketch; everything
else is exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import ConfigMismatchError, EmptyCohortError, SchemaError
from .schema import MetricSchema

DEFAULT_HISTOGRAM_BUCKETS = 64

STAT_KINDS = (
    "count",
    "sum",
    "mean",
    "variance",
    "stddev",
    "min",
    "max",
    "range",
    "quantile",
)


class HistogramSpec(NamedTuple):
    """Per-metric ingest configuration for the histogram sketch."""

    lo: float
    hi: float
    buckets: int = DEFAULT_HISTOGRAM_BUCKETS

    def validate(self) -> "HistogramSpec":
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise SchemaError("histogram bounds must be finite")
        if self.hi <= self.lo:
            raise SchemaError(f"histogram needs lo < hi, got [{self.lo}, {self.hi})")
        if self.buckets < 1:
            raise SchemaError("histogram needs at least one bucket")
        return self


class HistogramSketch(NamedTuple):
    """Equal-width bucket counts over [lo, hi); out-of-range mass is counted
    separately so merges never rebin."""

    lo: float
    hi: float
    counts: tuple[int, ...]
    below: int
    above: int

    @property
    def bucket_width(self) -> float:
        return (self.hi - self.lo) / len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts) + self.below + self.above

    def spec(self) -> HistogramSpec:
        return HistogramSpec(self.lo, self.hi, len(self.counts))


def empty_histogram(spec: HistogramSpec) -> HistogramSketch:
    return HistogramSketch(spec.lo, spec.hi, (0,) * spec.buckets, 0, 0)


def histogram_of(value: float, spec: HistogramSpec) -> HistogramSketch:
    b = spec.buckets
    if value < spec.lo:
        return HistogramSketch(spec.lo, spec.hi, (0,) * b, 1, 0)
    if value >= spec.hi:
        return HistogramSketch(spec.lo, spec.hi, (0,) * b, 0, 1)
    idx = int((value - spec.lo) / (spec.hi - spec.lo) * b)
    idx = min(idx, b - 1)  # guards float rounding at the upper edge
    counts = [0] * b
    counts[idx] = 1
    return HistogramSketch(spec.lo, spec.hi, tuple(counts), 0, 0)


def merge_histograms(a: HistogramSketch | None, b: HistogramSketch | None) -> HistogramSketch | None:
    if a is None and b is None:
        return None
    if a is None or b is None:
        raise ConfigMismatchError("cannot merge a histogram with a histogram-less aggregate")
    if a.lo != b.lo or a.hi != b.hi or len(a.counts) != len(b.counts):
        raise ConfigMismatchError(
            f"histogram configs differ: [{a.lo},{a.hi})x{len(a.counts)} vs "
            f"[{b.lo},{b.hi})x{len(b.counts)}; refusing to rebin"
        )
    return HistogramSketch(
        a.lo,
        a.hi,
        tuple(x + y for x, y in zip(a.counts, b.counts)),
        a.below + b.below,
        a.above + b.above,
    )


class MetricAggregate(NamedTuple):
    """Mergeable state for one metric. min/max are None iff count == 0."""

    count: int
    sum: float
    sum_sq: float
    min: float | None
    max: float | None
    hist: HistogramSketch | None = None


def empty_metric(spec: HistogramSpec | None = None) -> MetricAggregate:
    hist = empty_histogram(spec) if spec is not None else None
    return MetricAggregate(0, 0.0, 0.0, None, None, hist)


def metric_of(value: float, spec: HistogramSpec | None = None) -> MetricAggregate:
    hist = histogram_of(value, spec) if spec is not None else None
    return MetricAggregate(1, value, value * value, value, value, hist)


def merge_metric(a: MetricAggregate, b: MetricAggregate) -> MetricAggregate:
    if a.count == 0:
        lo, hi = b.min, b.max
    elif b.count == 0:
        lo, hi = a.min, a.max
    else:
        lo = a.min if a.min <= b.min else b.min
        hi = a.max if a.max >= b.max else b.max
    return MetricAggregate(
        a.count + b.count,
        a.sum + b.sum,
        a.sum_sq + b.sum_sq,
        lo,
        hi,
        merge_histograms(a.hist, b.hist),
    )


class PartialAggregate(NamedTuple):
    """Aggregate states for all K metrics of one cohort.

    A NamedTuple rather than a dataclass: cube results materialize one of
    these per output row, so construction cost is on the hot path.
    """

    metrics: tuple[MetricAggregate, ...]

    @classmethod
    def empty(cls, specs: Sequence[HistogramSpec | None]) -> "PartialAggregate":
        return cls(tuple(empty_metric(s) for s in specs))

    @property
    def count(self) -> int:
        """Session count (identical across metrics by construction)."""
        return self.metrics[0].count if self.metrics else 0

    @property
    def is_empty(self) -> bool:
        return self.count == 0

    def merge(self, other: "PartialAggregate") -> "PartialAggregate":
        return merge(self, other)


def agg_from_session(
    values: Sequence[float], specs: Sequence[HistogramSpec | None]
) -> PartialAggregate:
    """Single-session aggregate: count 1, sum v, sum_sq v^2, min = max = v."""
    if len(values) != len(specs):
        raise SchemaError(f"{len(values)} metric values but {len(specs)} metric slots")
    states = []
    for v, spec in zip(values, specs):
        if not math.isfinite(v):
            raise SchemaError(f"non-finite metric value {v!r}")
        states.append(metric_of(v, spec))
    return PartialAggregate(tuple(states))


def merge(a: PartialAggregate, b: PartialAggregate) -> PartialAggregate:
    """Componentwise combine; associative and commutative, empty is identity."""
    if len(a.metrics) != len(b.metrics):
        raise SchemaError(
            f"aggregates span {len(a.metrics)} vs {len(b.metrics)} metrics"
        )
    return PartialAggregate(
        tuple(merge_metric(x, y) for x, y in zip(a.metrics, b.metrics))
    )


@dataclass(frozen=True)
class StatisticRequest:
    """A finalizable statistic over one metric.

    ``metric`` may be omitted for ``count`` (all metrics of a cohort share
    the session count); quantile requests carry p in (0, 1) and need
    histogram-enabled aggregates.
    """

    kind: str
    metric: str | None = None
    p: float | None = None

    def __post_init__(self):
        if self.kind not in STAT_KINDS:
            raise SchemaError(f"unknown statistic kind {self.kind!r}")
        if self.kind == "quantile":
            if self.p is None or not 0.0 < self.p < 1.0:
                raise SchemaError(f"quantile needs p in (0,1), got {self.p!r}")
        elif self.p is not None:
            raise SchemaError(f"{self.kind} does not take a quantile p")
        if self.kind != "count" and self.metric is None:
            raise SchemaError(f"{self.kind} requires a metric name")

    @classmethod
    def parse(cls, text: str) -> "StatisticRequest":
        """Parse forms like ``count``, ``mean:bitrate``, ``quantile(0.9):lag``."""
        kind, sep, metric = text.strip().partition(":")
        metric_name = metric.strip() if sep else None
        m = re.fullmatch(r"quantile\(([^)]+)\)", kind.strip())
        if m:
            try:
                p = float(m.group(1))
            except ValueError:
                raise SchemaError(f"bad quantile fraction in {text!r}") from None
            return cls("quantile", metric_name, p)
        return cls(kind.strip(), metric_name)

    def render(self) -> str:
        kind = f"quantile({self.p:g})" if self.kind == "quantile" else self.kind
        return kind if self.metric is None else f"{kind}:{self.metric}"

    def metric_index(self, metrics: MetricSchema) -> int:
        return 0 if self.metric is None else metrics.index_of(self.metric)


def quantile_estimate(h: HistogramSketch, total_count: int, p: float) -> float:
    """Approximate p-quantile by linear interpolation inside the bucket
    holding rank r = p * total_count; below/above-range mass sits at the
    lo/hi edges."""
    if total_count <= 0:
        raise EmptyCohortError("quantile of an empty cohort")
    if not 0.0 < p < 1.0:
        raise SchemaError(f"quantile needs p in (0,1), got {p}")
    rank = p * total_count
    if rank <= h.below:
        return h.lo
    cum = h.below
    width = h.bucket_width
    for i, c in enumerate(h.counts):
        if c and rank <= cum + c:
            return h.lo + (i + (rank - cum) / c) * width
        cum += c
    return h.hi


def finalize_metric(m: MetricAggregate, kind: str, p: float | None = None) -> float:
    """Finalize one statistic from a metric state; see ``finalize``."""
    if kind == "count":
        return float(m.count)
    if m.count == 0:
        raise EmptyCohortError(f"{kind} requested for an empty cohort")
    if kind == "sum":
        return m.sum
    if kind == "mean":
        return m.sum / m.count
    if kind == "variance":
        mean = m.sum / m.count
        return max(m.sum_sq / m.count - mean * mean, 0.0)
    if kind == "stddev":
        return math.sqrt(finalize_metric(m, "variance"))
    if kind == "min":
        return m.min
    if kind == "max":
        return m.max
    if kind == "range":
        return m.max - m.min
    if kind == "quantile":
        if m.hist is None:
            raise SchemaError("quantile requires histogram-enabled aggregates")
        return quantile_estimate(m.hist, m.count, p)
    raise SchemaError(f"unknown statistic kind {kind!r}")


def finalize(
    agg: PartialAggregate, req: StatisticRequest, metrics: MetricSchema
) -> float:
    """Evaluate a statistic from stored state alone.

    mean = sum/count, variance = sum_sq/count - mean^2 (population, clamped
    at 0), stddev = sqrt(variance), range = max - min; quantile interpolates
    the histogram. Raises EmptyCohortError when count = 0 and the statistic
    needs data; the caller decides whether to suppress or surface that.
    """
    idx = req.metric_index(metrics)
    if idx >= len(agg.metrics):
        raise SchemaError(f"aggregate has no metric index {idx}")
    return finalize_metric(agg.metrics[idx], req.kind, req.p)
