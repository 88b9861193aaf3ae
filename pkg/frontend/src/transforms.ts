/**
 * Pure view-model math. Every number the UI shows passes through here and
 * comes straight from a service response; no model math happens client-side.
 */

import type { ContributionsResponse, CurveResponse } from './types.js';

export const DISPLAY_DECIMALS = 4;

export function roundDisplay(value: number, decimals = DISPLAY_DECIMALS): number {
  const factor = 10 ** decimals;
  return Math.round(value * factor) / factor;
}

export function formatProbability(p: number): string {
  return `${(p * 100).toFixed(1)}%`;
}

export interface ContributionBar {
  name: string;
  /** baseline-centered contribution, as served in `display.contributions` */
  value: number;
  display: number;
}

/** Bars ranked by |contribution|, largest effect first. */
export function rankContributions(resp: ContributionsResponse): ContributionBar[] {
  return Object.entries(resp.display.contributions)
    .map(([name, value]) => ({ name, value, display: roundDisplay(value) }))
    .sort((a, b) => Math.abs(b.value) - Math.abs(a.value) || a.name.localeCompare(b.name));
}

/** Names of bars whose displayed value changed between two responses. */
export function changedBars(
  prev: ContributionsResponse,
  next: ContributionsResponse,
): string[] {
  const names = new Set([
    ...Object.keys(prev.display.contributions),
    ...Object.keys(next.display.contributions),
  ]);
  const changed: string[] = [];
  for (const name of names) {
    const a = roundDisplay(prev.display.contributions[name] ?? NaN);
    const b = roundDisplay(next.display.contributions[name] ?? NaN);
    if (a !== b) changed.push(name);
  }
  return changed.sort();
}

export interface CurveSeries {
  points: Array<[number, number]>;
  marker: { x: number; y: number } | null;
  label: string;
  color: string;
}

export function curveSeries(curve: CurveResponse, label: string, color: string): CurveSeries {
  const points = curve.x.map((x, i) => [x, curve.contribution[i]] as [number, number]);
  const marker =
    curve.current.value === null
      ? null
      : { x: curve.current.value, y: curve.current.contribution };
  return { points, marker, label, color };
}

export interface OverlayDomain {
  x: [number, number];
  y: [number, number];
}

/** Shared axis ranges for up to two overlaid curves (plus their markers). */
export function overlayDomain(series: CurveSeries[]): OverlayDomain {
  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of series) {
    for (const [x, y] of s.points) {
      xs.push(x);
      ys.push(y);
    }
    if (s.marker) {
      xs.push(s.marker.x);
      ys.push(s.marker.y);
    }
  }
  const pad = (lo: number, hi: number): [number, number] => {
    const span = hi - lo || 1;
    return [lo - 0.05 * span, hi + 0.05 * span];
  };
  return { x: pad(Math.min(...xs), Math.max(...xs)), y: pad(Math.min(...ys), Math.max(...ys)) };
}

/**
 * If curve B is a pointwise scalar multiple of curve A (the factored model's
 * across-profile behavior), return the ratio; null when the shapes differ.
 */
export function verticalScaleRatio(
  a: CurveResponse,
  b: CurveResponse,
  tolerance = 1e-9,
): number | null {
  if (a.x.length !== b.x.length) return null;
  let ratio: number | null = null;
  for (let i = 0; i < a.x.length; i++) {
    if (a.x[i] !== b.x[i]) return null;
    const ya = a.contribution[i];
    const yb = b.contribution[i];
    if (Math.abs(ya) <= tolerance) {
      if (Math.abs(yb) > tolerance) return null;
      continue;
    }
    const r = yb / ya;
    if (ratio === null) ratio = r;
    else if (Math.abs(r - ratio) > tolerance * Math.max(1, Math.abs(ratio))) return null;
  }
  return ratio;
}

/** SVG path for a polyline in screen coordinates. */
export function toPath(
  points: Array<[number, number]>,
  domain: OverlayDomain,
  width: number,
  height: number,
): string {
  const sx = (x: number) =>
    ((x - domain.x[0]) / (domain.x[1] - domain.x[0])) * width;
  const sy = (y: number) =>
    height - ((y - domain.y[0]) / (domain.y[1] - domain.y[0])) * height;
  return points
    .map(([x, y], i) => `${i === 0 ? 'M' : 'L'}${sx(x).toFixed(2)},${sy(y).toFixed(2)}`)
    .join(' ');
}
