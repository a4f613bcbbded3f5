"""Pydantic request/response models for the HTTP API.

The CLI builds its JSON output through these same models, so both
interfaces emit identical bodies for identical queries. Infinite detector
scores are carried as a null score plus an unbounded flag, keeping bodies
valid JSON with every numeric round-trippable at float64 resolution.
"""

from __future__ import annotations

import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..aggregates import StatisticRequest
from ..detectors import AlertSeries, DetectorConfig, PatternWhatif
from ..cube import EpochValue
from ..schema import CohortPattern, DatasetSchema


class ApiError(BaseModel):
    code: Literal["bad_pattern", "unknown_value", "empty_cohort", "range_error", "capacity", "io"]
    message: str


class AttributeModel(BaseModel):
    name: str
    values: list[str]


class EpochRangeModel(BaseModel):
    min: int
    max: int


class SchemaResponse(BaseModel):
    attributes: list[AttributeModel]
    metrics: list[str]
    version: int
    epochs: list[int]
    epoch_range: Optional[EpochRangeModel]


def build_schema_response(schema: DatasetSchema, epochs: list[int]) -> SchemaResponse:
    manifest = schema.to_manifest()
    return SchemaResponse(
        attributes=[AttributeModel(**a) for a in manifest["attributes"]],
        metrics=manifest["metrics"],
        version=manifest["version"],
        epochs=epochs,
        epoch_range=(
            EpochRangeModel(min=min(epochs), max=max(epochs)) if epochs else None
        ),
    )


class CohortPoint(BaseModel):
    epoch: int
    value: Optional[float]
    empty: bool
    count: int


class CohortResponse(BaseModel):
    pattern: str
    stat: str
    from_epoch: int = Field(serialization_alias="from")
    to_epoch: int = Field(serialization_alias="to")
    points: list[CohortPoint]
    missing_epochs: list[int]
    total_points: int
    limit: int
    offset: int


def build_cohort_response(
    pattern: CohortPattern,
    schema: DatasetSchema,
    stat: StatisticRequest,
    values: list[EpochValue],
    missing: list[int],
    from_epoch: int,
    to_epoch: int,
    limit: int,
    offset: int,
) -> CohortResponse:
    page = values[offset : offset + limit]
    return CohortResponse(
        pattern=pattern.render(schema.attributes),
        stat=stat.render(),
        from_epoch=from_epoch,
        to_epoch=to_epoch,
        points=[
            CohortPoint(
                epoch=v.epoch.index,
                value=None if v.empty else v.values[0],
                empty=v.empty,
                count=v.count,
            )
            for v in page
        ],
        missing_epochs=missing,
        total_points=len(values),
        limit=limit,
        offset=offset,
    )


class DetectorConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["three_sigma", "knn"]
    feature: str
    window: int = 30
    sigma_multiplier: float = 3.0
    knn_k: int = 3
    knn_tau: float = 1.0
    min_history: Optional[int] = None

    def to_config(self) -> DetectorConfig:
        return DetectorConfig(
            kind=self.kind,
            feature=StatisticRequest.parse(self.feature),
            window=self.window,
            sigma_multiplier=self.sigma_multiplier,
            knn_k=self.knn_k,
            knn_tau=self.knn_tau,
            min_history=self.min_history,
        )

    @classmethod
    def from_config(cls, config: DetectorConfig) -> "DetectorConfigModel":
        return cls(
            kind=config.kind,
            feature=config.feature.render(),
            window=config.window,
            sigma_multiplier=config.sigma_multiplier,
            knn_k=config.knn_k,
            knn_tau=config.knn_tau,
            min_history=config.min_history,
        )


class WhatifRequest(BaseModel):
    patterns: list[str]
    configs: list[DetectorConfigModel]
    from_epoch: int = Field(validation_alias="from", serialization_alias="from")
    to_epoch: int = Field(validation_alias="to", serialization_alias="to")

    model_config = ConfigDict(populate_by_name=True)

    @field_validator("configs")
    @classmethod
    def _one_or_two(cls, v):
        if not 1 <= len(v) <= 2:
            raise ValueError("what-if replay takes 1 or 2 configs")
        return v

    @field_validator("patterns")
    @classmethod
    def _at_least_one(cls, v):
        if not v:
            raise ValueError("at least one pattern is required")
        return v


class AlertPointModel(BaseModel):
    epoch: int
    feature: Optional[float]
    score: Optional[float]
    score_unbounded: bool = False
    decision: Literal["anomaly", "normal", "insufficient_history", "empty_cohort"]


class AlertSeriesModel(BaseModel):
    config: DetectorConfigModel
    points: list[AlertPointModel]
    anomaly_epochs: list[int]


class FeaturePointModel(BaseModel):
    epoch: int
    value: Optional[float]


class AlertDiffModel(BaseModel):
    added: list[int]
    suppressed: list[int]


class PatternWhatifModel(BaseModel):
    pattern: str
    features: list[FeaturePointModel]
    series: list[AlertSeriesModel]
    diff: Optional[AlertDiffModel]


class WhatifResponse(BaseModel):
    from_epoch: int = Field(serialization_alias="from")
    to_epoch: int = Field(serialization_alias="to")
    missing_epochs: list[int]
    results: list[PatternWhatifModel]


def _alert_series_model(series: AlertSeries) -> AlertSeriesModel:
    points = []
    for p in series.points:
        unbounded = p.score is not None and math.isinf(p.score)
        points.append(
            AlertPointModel(
                epoch=p.epoch.index,
                feature=p.feature,
                score=None if unbounded else p.score,
                score_unbounded=unbounded,
                decision=p.decision.value,
            )
        )
    return AlertSeriesModel(
        config=DetectorConfigModel.from_config(series.config),
        points=points,
        anomaly_epochs=series.anomaly_epochs(),
    )


def build_whatif_response(
    results: list[PatternWhatif],
    schema: DatasetSchema,
    missing: list[int],
    from_epoch: int,
    to_epoch: int,
) -> WhatifResponse:
    out = []
    for result in results:
        first = result.series[0]
        features = [
            FeaturePointModel(epoch=p.epoch.index, value=p.feature)
            for p in first.points
        ]
        out.append(
            PatternWhatifModel(
                pattern=result.pattern.render(schema.attributes),
                features=features,
                series=[_alert_series_model(s) for s in result.series],
                diff=(
                    AlertDiffModel(
                        added=list(result.diff.added),
                        suppressed=list(result.diff.suppressed),
                    )
                    if result.diff is not None
                    else None
                ),
            )
        )
    return WhatifResponse(
        from_epoch=from_epoch,
        to_epoch=to_epoch,
        missing_epochs=missing,
        results=out,
    )
