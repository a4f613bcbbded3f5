/** DOM wiring: dropdowns from /schema, a debounced sensitivity slider, the
 * timeline chart, and the pin-and-compare diff panel. */

import { ApiClient, ApiError } from "./api.js";
import { buildTimeline, renderSvg } from "./chart.js";
import { DebouncedRequester } from "./debounce.js";
import {
  SIGMA_MAX,
  SIGMA_MIN,
  SIGMA_STEP,
  applyError,
  applyResult,
  applySchema,
  buildRequest,
  diffView,
  initialState,
  pinCompare,
  setConfig,
  setSelection,
  setSigma,
  unpin,
  type UiState,
} from "./state.js";
import type { WhatifResponseBody } from "./types.js";

function apiBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? (window as { AHA_API_BASE?: string }).AHA_API_BASE ?? "http://127.0.0.1:8080";
}

const client = new ApiClient(apiBase());
let state: UiState = initialState();

const el = {
  cohort: document.getElementById("cohort-controls")!,
  detector: document.getElementById("detector") as HTMLSelectElement,
  metric: document.getElementById("metric") as HTMLSelectElement,
  stat: document.getElementById("stat") as HTMLSelectElement,
  sigma: document.getElementById("sigma") as HTMLInputElement,
  sigmaValue: document.getElementById("sigma-value")!,
  tau: document.getElementById("tau") as HTMLInputElement,
  tauValue: document.getElementById("tau-value")!,
  window: document.getElementById("window") as HTMLInputElement,
  from: document.getElementById("from") as HTMLInputElement,
  to: document.getElementById("to") as HTMLInputElement,
  pin: document.getElementById("pin") as HTMLButtonElement,
  banner: document.getElementById("banner")!,
  chart: document.getElementById("chart")!,
  diff: document.getElementById("diff-panel")!,
  pattern: document.getElementById("pattern-label")!,
};

const requester = new DebouncedRequester<WhatifResponseBody>(
  () => client.whatif(buildRequest(state)),
  (response) => {
    const result = response.results[0];
    if (result) {
      state = applyResult(state, result);
      render();
    }
  },
  (error) => {
    const message =
      error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
    state = applyError(state, message);
    render();
  },
);

function render(): void {
  el.banner.textContent = state.error ?? "";
  el.banner.classList.toggle("hidden", state.error === null);
  el.pattern.textContent = `cohort: ${buildRequest(state).patterns[0]}`;
  if (state.current) {
    el.chart.innerHTML = renderSvg(buildTimeline(state.current));
    const view = diffView(state.current.diff);
    if (view) {
      el.diff.innerHTML =
        `<strong>comparison</strong>: ` +
        `<span class="added">${view.addedCount} added</span> ` +
        `[${view.addedEpochs.join(", ")}] · ` +
        `<span class="suppressed">${view.suppressedCount} suppressed</span> ` +
        `[${view.suppressedEpochs.join(", ")}]`;
    } else {
      el.diff.textContent = state.pinned ? "comparison pending…" : "";
    }
  } else if (state.error === null) {
    el.chart.innerHTML = '<p class="placeholder">pick a cohort to load its history</p>';
  }
  el.pin.textContent = state.pinned ? "unpin comparison" : "pin and compare";
}

function refresh(): void {
  requester.trigger();
}

function buildControls(): void {
  el.cohort.innerHTML = "";
  for (const attribute of state.attributes) {
    const label = document.createElement("label");
    label.textContent = attribute.name;
    const select = document.createElement("select");
    for (const value of ["*", ...attribute.values]) {
      const option = document.createElement("option");
      option.value = value;
      option.textContent = value;
      select.appendChild(option);
    }
    select.value = state.selections[attribute.name] ?? "*";
    select.addEventListener("change", () => {
      state = setSelection(state, attribute.name, select.value);
      refresh();
    });
    label.appendChild(select);
    el.cohort.appendChild(label);
  }
  el.metric.innerHTML = "";
  for (const metric of state.metrics) {
    const option = document.createElement("option");
    option.value = metric;
    option.textContent = metric;
    el.metric.appendChild(option);
  }
  el.metric.value = state.metric;
  el.from.value = String(state.epochFrom);
  el.to.value = String(state.epochTo);
}

function wireInputs(): void {
  el.sigma.min = String(SIGMA_MIN);
  el.sigma.max = String(SIGMA_MAX);
  el.sigma.step = String(SIGMA_STEP);
  el.sigma.value = String(state.config.sigmaMultiplier);
  el.sigmaValue.textContent = el.sigma.value;
  el.sigma.addEventListener("input", () => {
    state = setSigma(state, Number(el.sigma.value));
    el.sigmaValue.textContent = state.config.sigmaMultiplier.toFixed(1);
    refresh();
  });
  el.tau.addEventListener("input", () => {
    state = setConfig(state, { knnTau: Number(el.tau.value) });
    el.tauValue.textContent = el.tau.value;
    refresh();
  });
  el.window.addEventListener("change", () => {
    state = setConfig(state, { window: Number(el.window.value) });
    refresh();
  });
  el.detector.addEventListener("change", () => {
    state = setConfig(state, { kind: el.detector.value as "three_sigma" | "knn" });
    document.body.dataset.detector = el.detector.value;
    refresh();
  });
  el.metric.addEventListener("change", () => {
    state = { ...state, metric: el.metric.value };
    refresh();
  });
  el.stat.addEventListener("change", () => {
    state = { ...state, statKind: el.stat.value };
    refresh();
  });
  el.from.addEventListener("change", () => {
    state = { ...state, epochFrom: Number(el.from.value) };
    refresh();
  });
  el.to.addEventListener("change", () => {
    state = { ...state, epochTo: Number(el.to.value) };
    refresh();
  });
  el.pin.addEventListener("click", () => {
    state = state.pinned ? unpin(state) : pinCompare(state);
    render();
    refresh();
  });
}

async function start(): Promise<void> {
  try {
    const schema = await client.schema();
    state = applySchema(state, schema);
    buildControls();
    wireInputs();
    render();
    refresh();
  } catch (error) {
    const message =
      error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
    el.banner.textContent = `cannot reach the replay service at ${apiBase()} (${message})`;
    el.banner.classList.remove("hidden");
  }
}

void start();
