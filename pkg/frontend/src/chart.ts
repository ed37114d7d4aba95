/** Plain-polyline series chart rendered to an SVG string: shape and
 * magnitude only, values appear on hover via native tooltips. */

import { SeriesPayload } from "./api.js";

export interface ChartGeometry {
  width: number;
  height: number;
  padding: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = { width: 640, height: 220, padding: 24 };

const PALETTE = ["#2563eb", "#dc2626", "#059669", "#d97706"];

export interface ScaledPoint {
  x: number;
  y: number;
  value: number;
}

/** Map values onto chart coordinates; y grows downward in SVG, so the max
 * value lands at the top padding line. A flat series sits on the midline. */
export function scaleSeries(
  values: number[],
  lo: number,
  hi: number,
  geometry: ChartGeometry,
): ScaledPoint[] {
  if (values.length === 0) return [];
  const innerWidth = geometry.width - 2 * geometry.padding;
  const innerHeight = geometry.height - 2 * geometry.padding;
  const span = hi - lo;
  const step = values.length > 1 ? innerWidth / (values.length - 1) : 0;
  return values.map((value, i) => ({
    x: geometry.padding + (values.length > 1 ? i * step : innerWidth / 2),
    y:
      span > 0
        ? geometry.padding + (1 - (value - lo) / span) * innerHeight
        : geometry.padding + innerHeight / 2,
    value,
  }));
}

export function polylinePoints(points: ScaledPoint[]): string {
  return points.map((p) => `${round2(p.x)},${round2(p.y)}`).join(" ");
}

function round2(x: number): number {
  return Math.round(x * 100) / 100;
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Render every series into one SVG, sharing a y-scale so magnitudes are
 * comparable across series of the same sample. */
export function renderChart(
  series: SeriesPayload[],
  geometry: ChartGeometry = DEFAULT_GEOMETRY,
): string {
  const all = series.flatMap((s) => s.values);
  if (all.length === 0) {
    return `<svg class="chart" viewBox="0 0 ${geometry.width} ${geometry.height}" role="img"></svg>`;
  }
  const lo = Math.min(...all);
  const hi = Math.max(...all);
  const parts: string[] = [];
  parts.push(
    `<svg class="chart" viewBox="0 0 ${geometry.width} ${geometry.height}" role="img">`,
  );
  parts.push(
    `<text class="axis-label axis-max" x="2" y="${geometry.padding}">${round2(hi)}</text>`,
    `<text class="axis-label axis-min" x="2" y="${geometry.height - geometry.padding}">${round2(lo)}</text>`,
  );
  series.forEach((one, index) => {
    const color = PALETTE[index % PALETTE.length];
    const points = scaleSeries(one.values, lo, hi, geometry);
    const label = escapeXml(`${one.domain} (${one.unit})`);
    parts.push(`<g class="series series-${index}" data-label="${label}">`);
    parts.push(
      `<polyline fill="none" stroke="${color}" stroke-width="1.5" points="${polylinePoints(points)}"/>`,
    );
    for (const point of points) {
      parts.push(
        `<circle class="hover-dot" cx="${round2(point.x)}" cy="${round2(point.y)}" r="3" ` +
          `fill="transparent" stroke="none" pointer-events="all">` +
          `<title>${round2(point.value)} ${escapeXml(one.unit)}</title></circle>`,
      );
    }
    parts.push("</g>");
  });
  parts.push("</svg>");
  return parts.join("");
}
