/** Pure client state and transitions.
 *
 * All detection math lives server side; this module only assembles
 * requests and mirrors responses. In particular the displayed diff is the
 * API's diff field verbatim, never recomputed from the series.
 */

import type {
  AlertDiffBody,
  DetectorConfigBody,
  DetectorKind,
  PatternWhatifBody,
  SchemaResponse,
  WhatifRequestBody,
} from "./types.js";

export const SIGMA_MIN = 0.5;
export const SIGMA_MAX = 10.0;
export const SIGMA_STEP = 0.1;

export interface LiveConfig {
  kind: DetectorKind;
  sigmaMultiplier: number;
  knnK: number;
  knnTau: number;
  window: number;
  minHistory: number | null;
}

export interface UiState {
  schemaFingerprint: string | null;
  attributes: { name: string; values: string[] }[];
  metrics: string[];
  selections: Record<string, string>; // attribute name -> value or "*"
  metric: string;
  statKind: string;
  config: LiveConfig;
  pinned: LiveConfig | null; // frozen comparison baseline (config A)
  epochFrom: number;
  epochTo: number;
  current: PatternWhatifBody | null;
  error: string | null;
}

export const DEFAULT_CONFIG: LiveConfig = {
  kind: "three_sigma",
  sigmaMultiplier: 3.0,
  knnK: 3,
  knnTau: 1.0,
  window: 30,
  minHistory: null,
};

export function initialState(): UiState {
  return {
    schemaFingerprint: null,
    attributes: [],
    metrics: [],
    selections: {},
    metric: "",
    statKind: "mean",
    config: { ...DEFAULT_CONFIG },
    pinned: null,
    epochFrom: 0,
    epochTo: 0,
    current: null,
    error: null,
  };
}

export function schemaFingerprint(schema: SchemaResponse): string {
  return JSON.stringify({
    attributes: schema.attributes,
    metrics: schema.metrics,
    version: schema.version,
  });
}

/** Adopt a schema; a changed fingerprint invalidates every cached response
 * and selection so nothing from the previous store leaks through. */
export function applySchema(state: UiState, schema: SchemaResponse): UiState {
  const fingerprint = schemaFingerprint(schema);
  const unchanged = state.schemaFingerprint === fingerprint;
  const selections: Record<string, string> = {};
  for (const attribute of schema.attributes) {
    const prior = unchanged ? state.selections[attribute.name] : undefined;
    selections[attribute.name] = prior ?? "*";
  }
  return {
    ...state,
    schemaFingerprint: fingerprint,
    attributes: schema.attributes,
    metrics: schema.metrics,
    selections,
    metric: unchanged && state.metric ? state.metric : (schema.metrics[0] ?? ""),
    epochFrom: schema.epoch_range?.min ?? 0,
    epochTo: schema.epoch_range?.max ?? 0,
    current: unchanged ? state.current : null,
    pinned: unchanged ? state.pinned : null,
    error: null,
  };
}

export function setSelection(state: UiState, attribute: string, value: string): UiState {
  return { ...state, selections: { ...state.selections, [attribute]: value } };
}

export function clampSigma(value: number): number {
  const clamped = Math.min(SIGMA_MAX, Math.max(SIGMA_MIN, value));
  return Math.round(clamped / SIGMA_STEP) * SIGMA_STEP;
}

export function setSigma(state: UiState, value: number): UiState {
  return { ...state, config: { ...state.config, sigmaMultiplier: clampSigma(value) } };
}

export function setConfig(state: UiState, config: Partial<LiveConfig>): UiState {
  const merged = { ...state.config, ...config };
  merged.sigmaMultiplier = clampSigma(merged.sigmaMultiplier);
  return { ...state, config: merged };
}

/** Freeze the live config as comparison baseline A; subsequent slider
 * moves only change config B. */
export function pinCompare(state: UiState): UiState {
  return { ...state, pinned: { ...state.config } };
}

export function unpin(state: UiState): UiState {
  const current = state.current
    ? { ...state.current, diff: null, series: state.current.series.slice(-1) }
    : null;
  return { ...state, pinned: null, current };
}

export function patternString(state: UiState): string {
  const parts = state.attributes
    .map((a) => ({ name: a.name, value: state.selections[a.name] ?? "*" }))
    .filter((s) => s.value !== "*")
    .map((s) => `${s.name}=${s.value}`);
  return parts.length ? parts.join(",") : "*";
}

export function featureString(state: UiState): string {
  return `${state.statKind}:${state.metric}`;
}

function toBody(config: LiveConfig, feature: string): DetectorConfigBody {
  return {
    kind: config.kind,
    feature,
    window: config.window,
    sigma_multiplier: config.sigmaMultiplier,
    knn_k: config.knnK,
    knn_tau: config.knnTau,
    min_history: config.minHistory,
  };
}

/** When pinned, config A (the baseline) goes first so the response diff
 * reads as alerts added/suppressed by the live config B. */
export function buildRequest(state: UiState): WhatifRequestBody {
  const feature = featureString(state);
  const configs = state.pinned
    ? [toBody(state.pinned, feature), toBody(state.config, feature)]
    : [toBody(state.config, feature)];
  return {
    patterns: [patternString(state)],
    configs,
    from: state.epochFrom,
    to: state.epochTo,
  };
}

export function applyResult(state: UiState, result: PatternWhatifBody): UiState {
  return { ...state, current: result, error: null };
}

export function applyError(state: UiState, message: string): UiState {
  return { ...state, error: message };
}

export interface DiffView {
  addedCount: number;
  suppressedCount: number;
  addedEpochs: number[];
  suppressedEpochs: number[];
}

/** The diff panel content: the API's diff field verbatim. */
export function diffView(diff: AlertDiffBody | null): DiffView | null {
  if (diff === null) return null;
  return {
    addedCount: diff.added.length,
    suppressedCount: diff.suppressed.length,
    addedEpochs: diff.added,
    suppressedEpochs: diff.suppressed,
  };
}
