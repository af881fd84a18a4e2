// Forest plot for the effects table. Rows are a verbatim projection of the
// server payload; the only client-side arithmetic is pixel placement.

import type { DimensionInfo, EffectRow } from "./types.js";

export interface ForestPlotRow {
  dimensionId: string;
  label: string;
  r: number | null;
  ciLo: number | null;
  ciHi: number | null;
  count: number; // books shown in parentheses: n with the attribute, or n
  bandLo: number | null;
  bandHi: number | null;
  expectedSign: number | null;
  lowN: boolean;
  inestimable: boolean;
  postHoc: boolean;
}

export function toPlotRows(effects: EffectRow[], postHoc: boolean,
                           dimensions: DimensionInfo[] = []): ForestPlotRow[] {
  const labels = new Map(dimensions.map((d) => [d.id, d.label]));
  return effects.map((row) => ({
    dimensionId: row.dimension_id,
    label: labels.get(row.dimension_id) ?? row.dimension_id,
    r: row.r,
    ciLo: row.ci_lo,
    ciHi: row.ci_hi,
    count: "1" in row.n_level ? row.n_level["1"] : (row.n_level["n"] ?? 0),
    bandLo: row.band_lo,
    bandHi: row.band_hi,
    expectedSign: row.expected_sign,
    lowN: row.flag.split(",").includes("low_n"),
    inestimable: row.flag.split(",").includes("inestimable"),
    postHoc,
  }));
}

export type SortKey = "r" | "surprise" | "n";

function bandMidpoint(row: ForestPlotRow): number | null {
  if (row.bandLo !== null && row.bandHi !== null) {
    return (row.bandLo + row.bandHi) / 2;
  }
  return null;
}

/** Surprise: distance between the estimate and the expectation midpoint. */
export function surprise(row: ForestPlotRow): number | null {
  const mid = bandMidpoint(row);
  if (mid === null || row.r === null) return null;
  return Math.abs(row.r - mid);
}

export function sortRows(rows: ForestPlotRow[], key: SortKey): ForestPlotRow[] {
  const sorted = [...rows];
  const last = Number.NEGATIVE_INFINITY;
  if (key === "r") {
    sorted.sort((a, b) => (b.r ?? last) - (a.r ?? last));
  } else if (key === "n") {
    sorted.sort((a, b) => b.count - a.count);
  } else {
    sorted.sort((a, b) => (surprise(b) ?? last) - (surprise(a) ?? last));
  }
  return sorted;
}

const WIDTH = 720;
const LABEL_WIDTH = 280;
const ROW_HEIGHT = 22;
const AXIS_MIN = -0.5;
const AXIS_MAX = 0.5;

function xPixel(value: number): number {
  const span = WIDTH - LABEL_WIDTH - 20;
  return LABEL_WIDTH + ((value - AXIS_MIN) / (AXIS_MAX - AXIS_MIN)) * span;
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Render the plot as an SVG string; rows carry data-dimension for clicks. */
export function renderForestPlot(rows: ForestPlotRow[]): string {
  const height = rows.length * ROW_HEIGHT + 30;
  const parts: string[] = [
    `<svg class="forest-plot" viewBox="0 0 ${WIDTH} ${height}" ` +
      `width="${WIDTH}" height="${height}" role="img">`,
    `<line x1="${xPixel(0)}" y1="0" x2="${xPixel(0)}" y2="${height - 24}" ` +
      `stroke="#999" stroke-dasharray="3,3"/>`,
  ];
  rows.forEach((row, i) => {
    const y = i * ROW_HEIGHT + ROW_HEIGHT / 2;
    parts.push(`<g class="plot-row" data-dimension="${esc(row.dimensionId)}">`);
    const labelClass = row.inestimable ? "row-label inestimable" : "row-label";
    const decoration = row.inestimable ? ' text-decoration="line-through"' : "";
    parts.push(
      `<text x="4" y="${y + 4}" class="${labelClass}"${decoration} font-size="12">` +
        `${esc(row.label)} (${row.count})${row.lowN ? " !" : ""}</text>`);
    if (row.bandLo !== null && row.bandHi !== null) {
      const x0 = xPixel(row.bandLo);
      parts.push(
        `<rect class="expectation-band" x="${x0.toFixed(1)}" y="${y - 8}" ` +
          `width="${(xPixel(row.bandHi) - x0).toFixed(1)}" height="16" ` +
          `fill="#bbb" opacity="0.45"/>`);
    }
    if (!row.inestimable && row.r !== null && row.ciLo !== null && row.ciHi !== null) {
      parts.push(
        `<line class="whiskers" x1="${xPixel(row.ciLo).toFixed(1)}" y1="${y}" ` +
          `x2="${xPixel(row.ciHi).toFixed(1)}" y2="${y}" stroke="#333"/>`);
      parts.push(
        `<circle class="point" cx="${xPixel(row.r).toFixed(1)}" cy="${y}" ` +
          `r="4" fill="#1a6baf"/>`);
    } else {
      parts.push(
        `<text x="${xPixel(0) + 8}" y="${y + 4}" class="inestimable-marker" ` +
          `font-size="11" fill="#a33">inestimable</text>`);
    }
    parts.push("</g>");
  });
  const axisY = height - 8;
  for (const tick of [-0.5, -0.25, 0, 0.25, 0.5]) {
    parts.push(
      `<text x="${xPixel(tick)}" y="${axisY}" font-size="10" ` +
        `text-anchor="middle">${tick}</text>`);
  }
  parts.push("</svg>");
  return parts.join("\n");
}
