"""Synthetic session workloads with Zipf-distributed attributes.

Each attribute draws codes independently from P(k) proportional to k^-alpha
over k = 1..V. Metrics follow a per-leaf Gaussian: every leaf tuple owns a
mean derived from a counter-based hash of (seed, leaf), so the model is
reproducible regardless of which sessions happen to be sampled; sessions
add Gaussian noise around it. Injected anomalies shift a leaf's mean for
single epochs, with the ground-truth labels kept for scoring.

All metric values are snapped to a 1/256 grid so sums and sums of squares
stay exactly representable; exact-equality comparisons between reduction
orders then hold bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from ..errors import SchemaError
from ..schema import (
    AttributeSchema,
    DatasetSchema,
    EpochId,
    MetricSchema,
    SessionBatch,
    SessionRecord,
)

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)

# domain tags keep the per-leaf, per-epoch, and per-metric streams disjoint
_TAG_LEAF_MEAN = 0x51
_TAG_LEAF_PHASE = 0x52
_TAG_ANOMALY = 0x53


def _mix64(x: np.ndarray) -> np.ndarray:
    # array-only: scalar uint64 ops would trip numpy's overflow warnings
    x = (x + _GOLDEN) & _MASK
    x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK
    x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK
    return x ^ (x >> np.uint64(31))


def _mix64_int(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def _leaf_hash(codes: np.ndarray, seed: int, tag: int, extra: int = 0) -> np.ndarray:
    """One 64-bit word per row of a (N, M) code matrix, stable across runs."""
    h0 = _mix64_int((seed * 0x100 + tag + extra * 0x10001) & 0xFFFFFFFFFFFFFFFF)
    h = np.full(codes.shape[0], h0, dtype=np.uint64)
    for j in range(codes.shape[1]):
        column = codes[:, j].astype(np.uint64)
        salt = np.uint64((0x9E3779B97F4A7C15 * (j + 1)) & 0xFFFFFFFFFFFFFFFF)
        h = _mix64(h ^ (column + salt))
    return h


def _uniform(h: np.ndarray) -> np.ndarray:
    return (h >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def _leaf_normal(codes: np.ndarray, seed: int, metric: int) -> np.ndarray:
    """Standard normal per leaf via Box-Muller on two hashed uniforms."""
    u1 = _uniform(_leaf_hash(codes, seed, _TAG_LEAF_MEAN, metric))
    u2 = _uniform(_leaf_hash(codes, seed, _TAG_LEAF_PHASE, metric))
    u1 = np.maximum(u1, 2.0**-53)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def quantize(values: np.ndarray) -> np.ndarray:
    return np.round(values * 256.0) / 256.0


@dataclass(frozen=True)
class ZipfConfig:
    """Workload shape: M attributes x V values each, Zipf exponent alpha."""

    attributes: int
    values_per_attribute: int
    alpha: float
    sessions_per_epoch: int
    epochs: int
    metric_count: int = 1
    metric_loc: float = 100.0
    metric_spread: float = 20.0
    noise_sigma: float = 5.0
    anomaly_probability: float = 0.0
    anomaly_magnitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.attributes < 1 or self.values_per_attribute < 1:
            raise SchemaError("need at least one attribute and one value")
        if self.alpha < 0:
            raise SchemaError("zipf exponent must be non-negative")
        if self.epochs < 1 or self.sessions_per_epoch < 0:
            raise SchemaError("need at least one epoch and non-negative sessions")
        if not 0.0 <= self.anomaly_probability <= 1.0:
            raise SchemaError("anomaly probability must lie in [0, 1]")

    def zipf_probabilities(self) -> np.ndarray:
        ranks = np.arange(1, self.values_per_attribute + 1, dtype=np.float64)
        weights = ranks ** (-self.alpha)
        return weights / weights.sum()

    def dataset_schema(self) -> DatasetSchema:
        attrs = [
            (f"a{i}", [str(j) for j in range(self.values_per_attribute)])
            for i in range(self.attributes)
        ]
        metrics = tuple(f"m{j}" for j in range(self.metric_count))
        return DatasetSchema(AttributeSchema(attrs), MetricSchema(metrics))


@dataclass
class SessionFrame:
    """Columnar view of one epoch's sessions."""

    epoch: EpochId
    codes: np.ndarray  # (N, M) int64
    values: np.ndarray  # (N, K) float64

    def __len__(self) -> int:
        return self.codes.shape[0]

    def to_batch(self) -> SessionBatch:
        sessions = tuple(
            SessionRecord(tuple(int(c) for c in row), tuple(float(v) for v in vals))
            for row, vals in zip(self.codes, self.values)
        )
        return SessionBatch(self.epoch, sessions)

    def distinct_leaves(self) -> int:
        return np.unique(self.codes, axis=0).shape[0]


@dataclass
class ZipfDataset:
    config: ZipfConfig
    schema: DatasetSchema
    frames: list[SessionFrame]
    anomalies: set[tuple[tuple[int, ...], int]] = field(default_factory=set)

    def batches(self) -> list[SessionBatch]:
        return [frame.to_batch() for frame in self.frames]

    def __iter__(self) -> Iterator[SessionFrame]:
        return iter(self.frames)

    def raw_csv_bytes(self) -> int:
        """Size of the sessions serialized as a plain headered CSV."""
        header = ",".join(
            list(self.schema.attributes.names) + list(self.schema.metrics.names)
        )
        total = len(header) + 1
        for frame in self.frames:
            for row, vals in zip(frame.codes, frame.values):
                line = ",".join(str(int(c)) for c in row)
                line += "," + ",".join(repr(float(v)) for v in vals)
                total += len(line) + 1
        return total

    def raw_csv_text(self) -> str:
        header = ",".join(
            list(self.schema.attributes.names) + list(self.schema.metrics.names)
        )
        lines = [header]
        for frame in self.frames:
            for row, vals in zip(frame.codes, frame.values):
                lines.append(
                    ",".join(str(int(c)) for c in row)
                    + ","
                    + ",".join(repr(float(v)) for v in vals)
                )
        return "\n".join(lines) + "\n"


def generate_zipf(config: ZipfConfig) -> ZipfDataset:
    """Reproducible batches plus ground-truth injected-anomaly labels."""
    rng = np.random.default_rng(config.seed)
    probs = config.zipf_probabilities()
    schema = config.dataset_schema()
    n = config.sessions_per_epoch
    m = config.attributes
    k = config.metric_count
    frames = []
    anomalies: set[tuple[tuple[int, ...], int]] = set()
    for e in range(config.epochs):
        codes = np.empty((n, m), dtype=np.int64)
        for j in range(m):
            codes[:, j] = rng.choice(config.values_per_attribute, size=n, p=probs)
        values = np.empty((n, k), dtype=np.float64)
        for j in range(k):
            means = config.metric_loc + config.metric_spread * _leaf_normal(
                codes, config.seed, j
            )
            if config.anomaly_probability > 0.0:
                u = _uniform(_leaf_hash(codes, config.seed, _TAG_ANOMALY, e))
                shifted = u < config.anomaly_probability
                means = means + np.where(shifted, config.anomaly_magnitude, 0.0)
                if j == 0 and shifted.any():
                    for row in np.unique(codes[shifted], axis=0):
                        anomalies.add((tuple(int(c) for c in row), e))
            values[:, j] = means + rng.normal(0.0, config.noise_sigma, size=n)
        frames.append(SessionFrame(EpochId(e), codes, quantize(values)))
    return ZipfDataset(config=config, schema=schema, frames=frames, anomalies=anomalies)


def unique_leaf_ratio(frame: SessionFrame) -> float:
    """Distinct observed leaf tuples relative to the sample size.

    This is the sparsity trend quantity: it shrinks as samples grow because
    new sessions increasingly land in already-seen leaf groups.
    """
    if len(frame) == 0:
        return 0.0
    return frame.distinct_leaves() / len(frame)
