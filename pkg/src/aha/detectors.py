"""Feature extraction, anomaly detectors, and what-if replay.

Detectors score one cohort's per-epoch feature series against its own
trailing history: a window of the W epochs strictly before the scored
epoch, skipping empties. Replaying the same stored history under different
detector settings (or two settings side by side) is the whole point of
keeping replay cheap, so every knob lives in DetectorConfig.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from .aggregates import StatisticRequest
from .cube import query_pattern
from .errors import SchemaError
from .ingest import LeafTable
from .schema import CohortPattern, EpochId

#: Score reported when a constant history makes sigma zero but the value moved.
UNBOUNDED_SCORE = math.inf


class Decision(str, enum.Enum):
    ANOMALY = "anomaly"
    NORMAL = "normal"
    INSUFFICIENT_HISTORY = "insufficient_history"
    EMPTY_COHORT = "empty_cohort"


@dataclass(frozen=True)
class DetectorConfig:
    """Parameters for one detector run.

    window is the trailing history length in epochs; min_history is the
    fewest non-empty history points required to score (defaults to half the
    window). three-sigma uses sigma_multiplier; KNN uses neighbor count k
    and score threshold tau.
    """

    kind: str  # "three_sigma" | "knn"
    feature: StatisticRequest
    window: int = 30
    sigma_multiplier: float = 3.0
    knn_k: int = 3
    knn_tau: float = 1.0
    min_history: int | None = None

    def __post_init__(self):
        if self.kind not in ("three_sigma", "knn"):
            raise SchemaError(f"unknown detector kind {self.kind!r}")
        if self.window < 2:
            raise SchemaError(f"window must be at least 2, got {self.window}")
        if self.kind == "three_sigma" and self.sigma_multiplier <= 0:
            raise SchemaError("sigma multiplier must be positive")
        if self.kind == "knn":
            if self.knn_k < 1:
                raise SchemaError("knn needs k >= 1")
            if self.knn_k >= self.window:
                raise SchemaError(
                    f"knn neighbor count {self.knn_k} must be below window {self.window}"
                )
            if self.knn_tau < 0:
                raise SchemaError("knn threshold must be non-negative")
        if self.min_history is not None and self.min_history < 1:
            raise SchemaError("min_history must be at least 1")

    @property
    def required_history(self) -> int:
        base = self.min_history if self.min_history is not None else max(1, self.window // 2)
        if self.kind == "knn":
            return max(base, self.knn_k)
        return base


@dataclass(frozen=True)
class FeaturePoint:
    epoch: EpochId
    value: float | None  # None when the cohort was empty that epoch


@dataclass(frozen=True)
class AlertPoint:
    epoch: EpochId
    feature: float | None
    score: float | None  # present iff decision is anomaly or normal
    decision: Decision


@dataclass(frozen=True)
class AlertSeries:
    pattern: CohortPattern
    config: DetectorConfig
    points: tuple[AlertPoint, ...]

    def anomaly_epochs(self) -> list[int]:
        return [p.epoch.index for p in self.points if p.decision is Decision.ANOMALY]


@dataclass(frozen=True)
class AlertDiff:
    """Epochs whose anomaly decision changed between two configs."""

    added: tuple[int, ...]  # anomalous under the second config only
    suppressed: tuple[int, ...]  # anomalous under the first config only

    @classmethod
    def between(cls, a: AlertSeries, b: AlertSeries) -> "AlertDiff":
        ea, eb = set(a.anomaly_epochs()), set(b.anomaly_epochs())
        return cls(added=tuple(sorted(eb - ea)), suppressed=tuple(sorted(ea - eb)))


def extract_features(
    tables: Sequence[LeafTable],
    pattern: CohortPattern,
    feature: StatisticRequest,
    t1: int,
    t2: int,
) -> list[FeaturePoint]:
    """Per-epoch feature values for one cohort over [t1, t2].

    Empty epochs stay empty; nothing is interpolated or imputed.
    """
    selected = [t for t in tables if t1 <= t.epoch.index <= t2]
    values = query_pattern(selected, pattern, [feature])
    return [
        FeaturePoint(v.epoch, None if v.empty else v.values[0]) for v in values
    ]


def _history(features: Sequence[FeaturePoint], t: int, window: int) -> list[float]:
    lo = max(0, t - window)
    return [p.value for p in features[lo:t] if p.value is not None]


def detect_three_sigma(
    features: Sequence[FeaturePoint], config: DetectorConfig
) -> tuple[AlertPoint, ...]:
    """Flag epochs whose value sits more than sigma_multiplier population
    standard deviations from the trailing-history mean.

    A constant history (sigma = 0) flags any differing value, with an
    unbounded score sentinel standing in for the undefined ratio.
    """
    if config.kind != "three_sigma":
        raise SchemaError(f"three-sigma detector got config kind {config.kind!r}")
    out = []
    need = config.required_history
    for t, point in enumerate(features):
        if point.value is None:
            out.append(AlertPoint(point.epoch, None, None, Decision.EMPTY_COHORT))
            continue
        history = _history(features, t, config.window)
        if len(history) < need:
            out.append(
                AlertPoint(point.epoch, point.value, None, Decision.INSUFFICIENT_HISTORY)
            )
            continue
        n = len(history)
        mean = math.fsum(history) / n
        sigma = math.sqrt(math.fsum((v - mean) ** 2 for v in history) / n)
        deviation = abs(point.value - mean)
        if sigma == 0.0:
            score = 0.0 if deviation == 0.0 else UNBOUNDED_SCORE
            anomalous = deviation != 0.0
        else:
            score = deviation / sigma
            anomalous = deviation > config.sigma_multiplier * sigma
        out.append(
            AlertPoint(
                point.epoch,
                point.value,
                score,
                Decision.ANOMALY if anomalous else Decision.NORMAL,
            )
        )
    return tuple(out)


def detect_knn(
    features: Sequence[FeaturePoint], config: DetectorConfig
) -> tuple[AlertPoint, ...]:
    """Score each epoch by the distance to its k-th nearest trailing
    neighbor; flag when that distance exceeds tau."""
    if config.kind != "knn":
        raise SchemaError(f"knn detector got config kind {config.kind!r}")
    out = []
    need = config.required_history
    k = config.knn_k
    for t, point in enumerate(features):
        if point.value is None:
            out.append(AlertPoint(point.epoch, None, None, Decision.EMPTY_COHORT))
            continue
        history = _history(features, t, config.window)
        if len(history) < need:
            out.append(
                AlertPoint(point.epoch, point.value, None, Decision.INSUFFICIENT_HISTORY)
            )
            continue
        distances = sorted(abs(point.value - v) for v in history)
        score = distances[k - 1]
        out.append(
            AlertPoint(
                point.epoch,
                point.value,
                score,
                Decision.ANOMALY if score > config.knn_tau else Decision.NORMAL,
            )
        )
    return tuple(out)


def run_detector(
    features: Sequence[FeaturePoint], config: DetectorConfig, pattern: CohortPattern
) -> AlertSeries:
    points = (
        detect_three_sigma(features, config)
        if config.kind == "three_sigma"
        else detect_knn(features, config)
    )
    return AlertSeries(pattern=pattern, config=config, points=points)


@dataclass(frozen=True)
class PatternWhatif:
    """All series for one pattern, plus the decision diff when comparing."""

    pattern: CohortPattern
    series: tuple[AlertSeries, ...]
    diff: AlertDiff | None


def whatif_replay(
    tables: Sequence[LeafTable],
    patterns: Sequence[CohortPattern],
    configs: Sequence[DetectorConfig],
    t1: int,
    t2: int,
) -> list[PatternWhatif]:
    """Replay one or two detector configs over stored history.

    Features are extracted once per (pattern, feature request) and shared
    across configs; with two configs the result carries the added and
    suppressed anomaly epochs between the first and the second.
    """
    if not 1 <= len(configs) <= 2:
        raise SchemaError(f"what-if replay takes 1 or 2 configs, got {len(configs)}")
    out = []
    for pattern in patterns:
        cache: dict[StatisticRequest, list[FeaturePoint]] = {}
        series = []
        for config in configs:
            feats = cache.get(config.feature)
            if feats is None:
                feats = extract_features(tables, pattern, config.feature, t1, t2)
                cache[config.feature] = feats
            series.append(run_detector(feats, config, pattern))
        diff = AlertDiff.between(series[0], series[1]) if len(series) == 2 else None
        out.append(PatternWhatif(pattern=pattern, series=tuple(series), diff=diff))
    return out
