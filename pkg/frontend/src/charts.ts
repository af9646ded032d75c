/** SVG builders for the scatter projection and the forecast chart. Pure
 * string generation so the rendering contract is testable without a DOM. */

import type { ForecastChartModel, ScatterBubble } from "./viewmodel.js";

const esc = (s: string) => s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

function scale(values: number[], lo: number, hi: number): (v: number) => number {
  const min = Math.min(...values);
  const max = Math.max(...values);
  const span = max - min || 1;
  return (v) => lo + ((v - min) / span) * (hi - lo);
}

export function svgScatter(bubbles: ScatterBubble[], width = 560, height = 420): string {
  if (bubbles.length === 0) {
    return `<svg class="scatter" viewBox="0 0 ${width} ${height}"></svg>`;
  }
  const pad = 30;
  const sx = scale(bubbles.map((b) => b.x), pad, width - pad);
  const sy = scale(bubbles.map((b) => b.y), height - pad, pad);
  const parts = bubbles.map((b) => {
    const cx = sx(b.x).toFixed(1);
    const cy = sy(b.y).toFixed(1);
    const cls = b.highlighted ? "bubble highlighted" : "bubble";
    return `<g class="${cls}" data-token="${esc(b.token)}">` +
      `<circle cx="${cx}" cy="${cy}" r="${b.radius.toFixed(1)}">` +
      `<title>${esc(b.token)} (${b.frequency})</title></circle>` +
      `<text x="${cx}" y="${(sy(b.y) - b.radius - 2).toFixed(1)}">${esc(b.token)}</text></g>`;
  });
  return `<svg class="scatter" viewBox="0 0 ${width} ${height}">${parts.join("")}</svg>`;
}

export function svgForecast(chart: ForecastChartModel, width = 560, height = 320): string {
  if (chart.unforecast || chart.history.length === 0) {
    return `<svg class="forecast" viewBox="0 0 ${width} ${height}">` +
      `<text class="empty" x="${width / 2}" y="${height / 2}">insufficient data</text></svg>`;
  }
  const pad = 30;
  const indices = [...chart.history, ...chart.forecast].map((p) => p.index);
  const values = [
    ...chart.history.map((p) => p.value),
    ...chart.forecast.map((p) => p.value),
    ...chart.band.map((b) => b.lower),
    ...chart.band.map((b) => b.upper),
  ];
  const sx = scale(indices, pad, width - pad);
  const sy = scale(values, height - pad, pad);
  const line = (pts: { index: number; value: number }[]) =>
    pts.map((p) => `${sx(p.index).toFixed(1)},${sy(p.value).toFixed(1)}`).join(" ");
  const upper = chart.band.map((b) => `${sx(b.index).toFixed(1)},${sy(b.upper).toFixed(1)}`);
  const lower = [...chart.band].reverse()
    .map((b) => `${sx(b.index).toFixed(1)},${sy(b.lower).toFixed(1)}`);
  const bandPoints = [...upper, ...lower].join(" ");
  // bridge history into the forecast so the lines join up
  const lastHistory = chart.history[chart.history.length - 1];
  const forecastLine = line([lastHistory, ...chart.forecast]);
  return `<svg class="forecast" viewBox="0 0 ${width} ${height}">` +
    `<polygon class="band" points="${bandPoints}"></polygon>` +
    `<polyline class="history" fill="none" points="${line(chart.history)}"></polyline>` +
    `<polyline class="prediction" fill="none" points="${forecastLine}"></polyline>` +
    `<text class="trend" x="${width - pad}" y="${pad}">${esc(chart.trend ?? "")}</text>` +
    `</svg>`;
}
