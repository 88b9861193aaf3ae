/** DOM rendering: sliders, risk gauges, contribution bars, curve overlay. */

import {
  curveSeries,
  formatProbability,
  overlayDomain,
  rankContributions,
  roundDisplay,
  toPath,
} from './transforms.js';
import type { ProfileState } from './state.js';
import type { CurveResponse, SchemaFeature } from './types.js';

const SVG_NS = 'http://www.w3.org/2000/svg';
const PLOT_W = 460;
const PLOT_H = 260;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = '',
  text = '',
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export function renderStaticControls(
  container: HTMLElement,
  features: SchemaFeature[],
  profile: ProfileState,
  onChange: (name: string, value: number | string) => void,
): void {
  container.replaceChildren();
  for (const f of features) {
    const row = el('div', 'control-row');
    const label = el('label', 'control-label', f.name);
    label.title = 'Static feature: fixed for the case, shapes the weights';
    row.appendChild(label);
    if (f.levels) {
      const select = el('select');
      for (const level of f.levels) {
        const opt = el('option', '', level);
        opt.value = level;
        select.appendChild(opt);
      }
      select.value = String(profile.values[f.name]);
      select.addEventListener('change', () => onChange(f.name, select.value));
      row.appendChild(select);
    } else {
      const input = el('input');
      input.type = 'number';
      input.step = 'any';
      input.value = String(roundDisplay(Number(profile.values[f.name] ?? 0)));
      input.addEventListener('change', () => onChange(f.name, Number(input.value)));
      row.appendChild(input);
    }
    container.appendChild(row);
  }
}

export function renderSliders(
  container: HTMLElement,
  features: SchemaFeature[],
  profile: ProfileState,
  onInput: (name: string, value: number) => void,
  onSelect: (name: string) => void,
  selected: string | null,
): void {
  container.replaceChildren();
  for (const f of features) {
    const [lo, hi] = f.range ?? [-1, 1];
    const row = el('div', 'control-row' + (f.name === selected ? ' selected' : ''));
    const label = el('label', 'control-label', f.units ? `${f.name} (${f.units})` : f.name);
    label.addEventListener('click', () => onSelect(f.name));
    const slider = el('input');
    slider.type = 'range';
    slider.min = String(lo);
    slider.max = String(hi);
    slider.step = String((hi - lo) / 200);
    slider.value = String(profile.values[f.name] ?? (lo + hi) / 2);
    const readout = el('span', 'readout', String(roundDisplay(Number(slider.value))));
    slider.addEventListener('input', () => {
      readout.textContent = String(roundDisplay(Number(slider.value)));
      onInput(f.name, Number(slider.value));
    });
    row.append(label, slider, readout);
    container.appendChild(row);
  }
}

export function renderGauges(container: HTMLElement, profiles: ProfileState[]): void {
  container.replaceChildren();
  for (const p of profiles) {
    const card = el('div', 'gauge-card');
    card.style.borderColor = p.color;
    card.appendChild(el('div', 'gauge-label', p.label));
    const value = p.predict ? formatProbability(p.predict.probability) : '…';
    const risk = el('div', 'gauge-value', value);
    risk.style.color = p.color;
    card.appendChild(risk);
    if (p.contributions) {
      card.appendChild(
        el('div', 'gauge-sub', `baseline logit ${roundDisplay(p.contributions.display.bias)}`),
      );
    }
    container.appendChild(card);
  }
}

export function renderBars(container: HTMLElement, profiles: ProfileState[]): void {
  container.replaceChildren();
  const primary = profiles[0];
  if (!primary.contributions) return;
  const bars = rankContributions(primary.contributions);
  const maxAbs = Math.max(...bars.map((b) => Math.abs(b.value)), 1e-12);
  for (const bar of bars) {
    const row = el('div', 'bar-row');
    row.dataset.feature = bar.name;
    row.appendChild(el('span', 'bar-name', bar.name));
    const track = el('div', 'bar-track');
    for (const p of profiles) {
      if (!p.contributions) continue;
      const value = p.contributions.display.contributions[bar.name] ?? 0;
      const fill = el('div', 'bar-fill');
      fill.style.background = p.color;
      const half = 50;
      const width = Math.min((Math.abs(value) / maxAbs) * half, half);
      fill.style.width = `${width}%`;
      fill.style.left = value < 0 ? `${half - width}%` : `${half}%`;
      track.appendChild(fill);
    }
    const valueText = profiles
      .filter((p) => p.contributions)
      .map((p) => String(roundDisplay(p.contributions!.display.contributions[bar.name] ?? 0)))
      .join(' / ');
    row.append(track, el('span', 'bar-value', valueText));
    container.appendChild(row);
  }
}

export function renderCurvePanel(
  container: HTMLElement,
  feature: string | null,
  profiles: ProfileState[],
): void {
  container.replaceChildren();
  if (!feature) return;
  container.appendChild(el('h3', '', `contribution of ${feature}`));
  const responses = profiles
    .map((p) => ({ profile: p, curve: p.curves.get(feature) }))
    .filter((r): r is { profile: ProfileState; curve: CurveResponse } => !!r.curve);
  if (!responses.length) {
    container.appendChild(el('div', 'placeholder', 'fetching curve…'));
    return;
  }
  const series = responses.map((r) => curveSeries(r.curve, r.profile.label, r.profile.color));
  const domain = overlayDomain(series);

  const svg = document.createElementNS(SVG_NS, 'svg');
  svg.setAttribute('viewBox', `0 0 ${PLOT_W} ${PLOT_H}`);
  svg.setAttribute('class', 'curve-plot');

  const zeroY = PLOT_H - ((0 - domain.y[0]) / (domain.y[1] - domain.y[0])) * PLOT_H;
  if (zeroY >= 0 && zeroY <= PLOT_H) {
    const axis = document.createElementNS(SVG_NS, 'line');
    axis.setAttribute('x1', '0');
    axis.setAttribute('x2', String(PLOT_W));
    axis.setAttribute('y1', zeroY.toFixed(2));
    axis.setAttribute('y2', zeroY.toFixed(2));
    axis.setAttribute('class', 'zero-line');
    svg.appendChild(axis);
  }
  for (const s of series) {
    const path = document.createElementNS(SVG_NS, 'path');
    path.setAttribute('d', toPath(s.points, domain, PLOT_W, PLOT_H));
    path.setAttribute('fill', 'none');
    path.setAttribute('stroke', s.color);
    path.setAttribute('stroke-width', '2');
    svg.appendChild(path);
    if (s.marker) {
      const marker = document.createElementNS(SVG_NS, 'circle');
      const sx = ((s.marker.x - domain.x[0]) / (domain.x[1] - domain.x[0])) * PLOT_W;
      const sy = PLOT_H - ((s.marker.y - domain.y[0]) / (domain.y[1] - domain.y[0])) * PLOT_H;
      marker.setAttribute('cx', sx.toFixed(2));
      marker.setAttribute('cy', sy.toFixed(2));
      marker.setAttribute('r', '5');
      marker.setAttribute('fill', s.color);
      marker.setAttribute('data-label', s.label);
      svg.appendChild(marker);
    }
  }
  container.appendChild(svg);
  const legend = el('div', 'legend');
  for (const s of series) {
    const item = el('span', 'legend-item', s.label);
    item.style.color = s.color;
    legend.appendChild(item);
  }
  container.appendChild(legend);
}
