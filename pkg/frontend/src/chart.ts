/** Timeline model and SVG rendering for one cohort's feature series.
 *
 * The anomaly markers come straight from the response's anomaly_epochs;
 * nothing is re-derived client side. In comparison mode the markers from
 * the live config are drawn as anomalies while the response diff paints
 * added and suppressed epochs in their own styles. Epochs where the cohort
 * was empty or history was insufficient get distinct status ticks, and a
 * series with no data at all renders an explicit no-data state instead of
 * an empty axis frame.
 */

import type { PatternWhatifBody } from "./types.js";

export interface ChartPoint {
  epoch: number;
  value: number;
  x: number;
  y: number;
}

export interface Marker {
  epoch: number;
  x: number;
  y: number;
  kind: "anomaly" | "added" | "suppressed";
}

export interface StatusTick {
  epoch: number;
  x: number;
  kind: "empty_cohort" | "insufficient_history";
}

export interface TimelineModel {
  width: number;
  height: number;
  empty: boolean;
  comparison: boolean;
  points: ChartPoint[];
  segments: { from: ChartPoint; to: ChartPoint }[];
  markers: Marker[];
  statusTicks: StatusTick[];
  xTicks: { x: number; label: string }[];
  yTicks: { y: number; label: string }[];
}

const WIDTH = 860;
const HEIGHT = 300;
const PAD = { left: 56, right: 16, top: 16, bottom: 32 };

function niceTicks(lo: number, hi: number, count: number): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = 10 ** Math.floor(Math.log10(span / count));
  const candidates = [step, 2 * step, 5 * step, 10 * step];
  const chosen = candidates.find((s) => span / s <= count) ?? 10 * step;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / chosen) * chosen; v <= hi + 1e-12; v += chosen) {
    ticks.push(Number(v.toFixed(12)));
  }
  return ticks;
}

export function buildTimeline(result: PatternWhatifBody): TimelineModel {
  const live = result.series[result.series.length - 1];
  const comparison = result.diff !== null && result.series.length === 2;
  const features = result.features;
  const present = features.filter((p) => p.value !== null);
  const model: TimelineModel = {
    width: WIDTH,
    height: HEIGHT,
    empty: present.length === 0,
    comparison,
    points: [],
    segments: [],
    markers: [],
    statusTicks: [],
    xTicks: [],
    yTicks: [],
  };
  if (model.empty || features.length === 0 || live === undefined) return model;

  const epochs = features.map((p) => p.epoch);
  const epochLo = Math.min(...epochs);
  const epochHi = Math.max(...epochs);
  const values = present.map((p) => p.value as number);
  let valueLo = Math.min(...values);
  let valueHi = Math.max(...values);
  if (valueLo === valueHi) {
    valueLo -= 1;
    valueHi += 1;
  }
  const innerW = WIDTH - PAD.left - PAD.right;
  const innerH = HEIGHT - PAD.top - PAD.bottom;
  const xOf = (epoch: number) =>
    PAD.left + (epochHi === epochLo ? innerW / 2 : ((epoch - epochLo) / (epochHi - epochLo)) * innerW);
  const yOf = (value: number) => PAD.top + (1 - (value - valueLo) / (valueHi - valueLo)) * innerH;

  const byEpoch = new Map<number, ChartPoint>();
  let previous: ChartPoint | null = null;
  for (const feature of features) {
    if (feature.value === null) {
      previous = null; // gaps break the line rather than interpolate
      continue;
    }
    const point: ChartPoint = {
      epoch: feature.epoch,
      value: feature.value,
      x: xOf(feature.epoch),
      y: yOf(feature.value),
    };
    model.points.push(point);
    byEpoch.set(feature.epoch, point);
    if (previous !== null) model.segments.push({ from: previous, to: point });
    previous = point;
  }

  for (const epoch of live.anomaly_epochs) {
    const point = byEpoch.get(epoch);
    if (point) model.markers.push({ epoch, x: point.x, y: point.y, kind: "anomaly" });
  }
  if (comparison && result.diff) {
    for (const epoch of result.diff.added) {
      const point = byEpoch.get(epoch);
      if (point) model.markers.push({ epoch, x: point.x, y: point.y, kind: "added" });
    }
    for (const epoch of result.diff.suppressed) {
      const point = byEpoch.get(epoch);
      if (point) model.markers.push({ epoch, x: point.x, y: point.y, kind: "suppressed" });
    }
  }

  for (const point of live.points) {
    if (point.decision === "empty_cohort" || point.decision === "insufficient_history") {
      model.statusTicks.push({ epoch: point.epoch, x: xOf(point.epoch), kind: point.decision });
    }
  }

  model.xTicks = niceTicks(epochLo, epochHi, 8).map((e) => ({
    x: xOf(e),
    label: String(Math.round(e)),
  }));
  model.yTicks = niceTicks(valueLo, valueHi, 5).map((v) => ({
    y: yOf(v),
    label: Number(v.toPrecision(4)).toString(),
  }));
  return model;
}

const MARKER_STYLE: Record<Marker["kind"], string> = {
  anomaly: 'class="marker anomaly" r="5" fill="#d33"',
  added: 'class="marker added" r="8" fill="none" stroke="#d33" stroke-width="2"',
  suppressed: 'class="marker suppressed" r="8" fill="none" stroke="#888" stroke-dasharray="3,2" stroke-width="2"',
};

export function renderSvg(model: TimelineModel): string {
  if (model.empty) {
    return (
      `<svg viewBox="0 0 ${model.width} ${model.height}" role="img">` +
      `<text class="no-data" x="${model.width / 2}" y="${model.height / 2}" ` +
      `text-anchor="middle">no data for this cohort in the selected range</text></svg>`
    );
  }
  const parts: string[] = [
    `<svg viewBox="0 0 ${model.width} ${model.height}" role="img">`,
  ];
  for (const tick of model.yTicks) {
    parts.push(
      `<line class="grid" x1="${PAD.left}" y1="${tick.y}" x2="${model.width - PAD.right}" y2="${tick.y}"/>`,
      `<text class="tick" x="${PAD.left - 8}" y="${tick.y + 4}" text-anchor="end">${tick.label}</text>`,
    );
  }
  for (const tick of model.xTicks) {
    parts.push(
      `<text class="tick" x="${tick.x}" y="${model.height - 10}" text-anchor="middle">${tick.label}</text>`,
    );
  }
  for (const tick of model.statusTicks) {
    const style = tick.kind === "empty_cohort" ? "status-empty" : "status-nohist";
    parts.push(
      `<line class="${style}" x1="${tick.x}" y1="${PAD.top}" x2="${tick.x}" y2="${model.height - PAD.bottom}"/>`,
    );
  }
  if (model.segments.length) {
    const path = model.segments
      .map((s, i) => {
        const move = i === 0 || model.segments[i - 1]?.to !== s.from;
        return `${move ? `M${s.from.x.toFixed(1)},${s.from.y.toFixed(1)}` : ""}L${s.to.x.toFixed(1)},${s.to.y.toFixed(1)}`;
      })
      .join("");
    parts.push(`<path class="feature-line" d="${path}" fill="none" stroke="#36c" stroke-width="1.5"/>`);
  } else if (model.points.length === 1) {
    const point = model.points[0]!;
    parts.push(`<circle class="feature-dot" cx="${point.x}" cy="${point.y}" r="3" fill="#36c"/>`);
  }
  for (const marker of model.markers) {
    parts.push(`<circle ${MARKER_STYLE[marker.kind]} cx="${marker.x}" cy="${marker.y}"/>`);
  }
  parts.push("</svg>");
  return parts.join("");
}
