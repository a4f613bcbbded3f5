/** JSON contract with the replay service. Field names match the wire format. */

export interface AttributeInfo {
  name: string;
  values: string[];
}

export interface EpochRange {
  min: number;
  max: number;
}

export interface SchemaResponse {
  attributes: AttributeInfo[];
  metrics: string[];
  version: number;
  epochs: number[];
  epoch_range: EpochRange | null;
}

export type DetectorKind = "three_sigma" | "knn";

export interface DetectorConfigBody {
  kind: DetectorKind;
  feature: string;
  window: number;
  sigma_multiplier: number;
  knn_k: number;
  knn_tau: number;
  min_history: number | null;
}

export interface WhatifRequestBody {
  patterns: string[];
  configs: DetectorConfigBody[];
  from: number;
  to: number;
}

export type Decision = "anomaly" | "normal" | "insufficient_history" | "empty_cohort";

export interface AlertPointBody {
  epoch: number;
  feature: number | null;
  score: number | null;
  score_unbounded: boolean;
  decision: Decision;
}

export interface AlertSeriesBody {
  config: DetectorConfigBody;
  points: AlertPointBody[];
  anomaly_epochs: number[];
}

export interface FeaturePointBody {
  epoch: number;
  value: number | null;
}

export interface AlertDiffBody {
  added: number[];
  suppressed: number[];
}

export interface PatternWhatifBody {
  pattern: string;
  features: FeaturePointBody[];
  series: AlertSeriesBody[];
  diff: AlertDiffBody | null;
}

export interface WhatifResponseBody {
  from: number;
  to: number;
  missing_epochs: number[];
  results: PatternWhatifBody[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
}
