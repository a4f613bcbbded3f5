import { describe, expect, it } from "vitest";

import {
  applyResult,
  applySchema,
  buildRequest,
  clampSigma,
  diffView,
  initialState,
  patternString,
  pinCompare,
  setConfig,
  setSelection,
  setSigma,
  unpin,
} from "../src/state.js";
import type { PatternWhatifBody, SchemaResponse } from "../src/types.js";

const SCHEMA: SchemaResponse = {
  attributes: [
    { name: "isp", values: ["comcast", "verizon"] },
    { name: "city", values: ["sf", "nyc"] },
  ],
  metrics: ["bitrate"],
  version: 1,
  epochs: [0, 1, 2, 3],
  epoch_range: { min: 0, max: 3 },
};

function someResult(diff: { added: number[]; suppressed: number[] } | null): PatternWhatifBody {
  const series = {
    config: {
      kind: "three_sigma" as const,
      feature: "mean:bitrate",
      window: 5,
      sigma_multiplier: 3,
      knn_k: 3,
      knn_tau: 1,
      min_history: null,
    },
    points: [],
    anomaly_epochs: [2],
  };
  return {
    pattern: "isp=comcast,city=*",
    features: [{ epoch: 0, value: 1.5 }],
    series: diff ? [series, series] : [series],
    diff,
  };
}

describe("schema handling", () => {
  it("defaults every attribute to wildcard", () => {
    const state = applySchema(initialState(), SCHEMA);
    expect(state.selections).toEqual({ isp: "*", city: "*" });
    expect(state.metric).toBe("bitrate");
    expect(state.epochFrom).toBe(0);
    expect(state.epochTo).toBe(3);
  });

  it("a changed schema fingerprint invalidates cached responses", () => {
    let state = applySchema(initialState(), SCHEMA);
    state = setSelection(state, "isp", "comcast");
    state = applyResult(state, someResult(null));
    state = pinCompare(state);

    const changed: SchemaResponse = {
      ...SCHEMA,
      attributes: [{ name: "isp", values: ["comcast", "verizon", "att"] }],
    };
    const next = applySchema(state, changed);
    expect(next.current).toBeNull();
    expect(next.pinned).toBeNull();
    expect(next.selections).toEqual({ isp: "*" });
  });

  it("an identical schema keeps state", () => {
    let state = applySchema(initialState(), SCHEMA);
    state = setSelection(state, "isp", "verizon");
    state = applyResult(state, someResult(null));
    const next = applySchema(state, { ...SCHEMA, epochs: [0, 1, 2, 3] });
    expect(next.selections.isp).toBe("verizon");
    expect(next.current).not.toBeNull();
  });
});

describe("pattern and request building", () => {
  it("omits wildcards from the pattern string", () => {
    let state = applySchema(initialState(), SCHEMA);
    expect(patternString(state)).toBe("*");
    state = setSelection(state, "city", "sf");
    expect(patternString(state)).toBe("city=sf");
    state = setSelection(state, "isp", "comcast");
    expect(patternString(state)).toBe("isp=comcast,city=sf");
  });

  it("sends one config when unpinned and baseline-first when pinned", () => {
    let state = applySchema(initialState(), SCHEMA);
    state = setSigma(state, 3.0);
    expect(buildRequest(state).configs).toHaveLength(1);

    state = pinCompare(state);
    state = setSigma(state, 6.0);
    const request = buildRequest(state);
    expect(request.configs).toHaveLength(2);
    expect(request.configs[0]!.sigma_multiplier).toBe(3.0); // pinned baseline A
    expect(request.configs[1]!.sigma_multiplier).toBe(6.0); // live config B
    expect(request.configs[0]!.feature).toBe("mean:bitrate");
    expect(request.from).toBe(0);
    expect(request.to).toBe(3);
  });

  it("unpin clears the comparison", () => {
    let state = applySchema(initialState(), SCHEMA);
    state = pinCompare(state);
    state = applyResult(state, someResult({ added: [], suppressed: [2] }));
    state = unpin(state);
    expect(state.pinned).toBeNull();
    expect(state.current?.diff).toBeNull();
    expect(buildRequest(state).configs).toHaveLength(1);
  });
});

describe("slider bounds", () => {
  it("clamps sigma to [0.5, 10] on a 0.1 grid", () => {
    expect(clampSigma(0.01)).toBe(0.5);
    expect(clampSigma(99)).toBe(10);
    expect(clampSigma(3.14159)).toBeCloseTo(3.1, 10);
  });

  it("setConfig keeps the clamp", () => {
    let state = applySchema(initialState(), SCHEMA);
    state = setConfig(state, { sigmaMultiplier: -5 });
    expect(state.config.sigmaMultiplier).toBe(0.5);
  });
});

describe("diff panel", () => {
  it("is the API diff verbatim, never recomputed", () => {
    // a diff that deliberately disagrees with the series' anomaly epochs:
    // the panel must mirror the API field, not re-derive it
    const view = diffView({ added: [7, 9], suppressed: [1] });
    expect(view).toEqual({
      addedCount: 2,
      suppressedCount: 1,
      addedEpochs: [7, 9],
      suppressedEpochs: [1],
    });
  });

  it("absent when the response has no diff", () => {
    expect(diffView(null)).toBeNull();
  });
});
