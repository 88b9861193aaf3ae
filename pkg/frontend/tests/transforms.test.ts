import { describe, expect, it } from 'vitest';

import {
  changedBars,
  curveSeries,
  formatProbability,
  overlayDomain,
  rankContributions,
  roundDisplay,
  toPath,
  verticalScaleRatio,
} from '../src/transforms.js';
import * as fx from './fixtures.js';

describe('contribution bars', () => {
  it('bar values equal the service response within display rounding', () => {
    const resp = fx.contributions('a');
    const bars = rankContributions(resp);
    expect(bars.length).toBe(fx.TV_FEATURES.length);
    for (const bar of bars) {
      const served = resp.display.contributions[bar.name];
      expect(Math.abs(bar.display - served)).toBeLessThanOrEqual(0.5e-4);
      expect(bar.value).toBe(served); // raw copy is exact
    }
  });

  it('bars are sorted by |contribution| descending', () => {
    const bars = rankContributions(fx.contributions('b'));
    for (let i = 1; i < bars.length; i++) {
      expect(Math.abs(bars[i - 1].value)).toBeGreaterThanOrEqual(Math.abs(bars[i].value));
    }
  });

  it('a slider change updates only the moved feature bar', () => {
    // fixtures captured before/after moving dose_b only; the service's
    // locality makes every other contribution identical
    const before = fx.contributions('a');
    const after = fx.contributionsMoved();
    expect(changedBars(before, after)).toEqual(['dose_b']);
  });

  it('display decomposition still sums to the served logit', () => {
    const resp = fx.contributions('b');
    const total =
      resp.display.bias +
      Object.values(resp.display.contributions).reduce((s, v) => s + v, 0);
    expect(Math.abs(total - resp.logit)).toBeLessThanOrEqual(1e-9);
  });
});

describe('curve overlay', () => {
  it('marker y-value equals the contribution bar value for the feature', () => {
    for (const tag of ['a', 'b'] as const) {
      const contrib = fx.contributions(tag);
      for (const feature of fx.TV_FEATURES) {
        const series = curveSeries(fx.curve(feature, tag), tag, '#000');
        expect(series.marker).not.toBeNull();
        // raw (uncentered) contributions match exactly on the wire
        expect(series.marker!.y).toBe(contrib.contributions[feature]);
      }
    }
  });

  it('reproduces vertical scaling across static profiles on the proportional model', () => {
    const a = fx.propCurve('a');
    const b = fx.propCurve('b');
    const ratio = verticalScaleRatio(a, b);
    expect(ratio).not.toBeNull();
    expect(ratio!).toBeCloseTo(2.0, 9);
    // markers scale by the same factor
    expect(b.current.contribution / a.current.contribution).toBeCloseTo(2.0, 9);
    // and the weights served alongside agree with the factorization
    const wa = fx.propContributions('a').weights['exposure'];
    const wb = fx.propContributions('b').weights['exposure'];
    expect(wb / wa).toBeCloseTo(2.0, 9);
  });

  it('scale detection rejects non-proportional curves', () => {
    const a = fx.curve('vital_a', 'a');
    const shifted = {
      ...a,
      contribution: a.contribution.map((y, i) => y + (i % 2 === 0 ? 0.2 : -0.2)),
    };
    expect(verticalScaleRatio(a, shifted)).toBeNull();
  });

  it('overlay domain covers both curves and markers', () => {
    const sa = curveSeries(fx.propCurve('a'), 'A', '#00f');
    const sb = curveSeries(fx.propCurve('b'), 'B', '#f80');
    const domain = overlayDomain([sa, sb]);
    for (const s of [sa, sb]) {
      for (const [x, y] of s.points) {
        expect(x).toBeGreaterThanOrEqual(domain.x[0]);
        expect(x).toBeLessThanOrEqual(domain.x[1]);
        expect(y).toBeGreaterThanOrEqual(domain.y[0]);
        expect(y).toBeLessThanOrEqual(domain.y[1]);
      }
    }
  });

  it('svg path maps domain corners to plot corners', () => {
    const domain = { x: [0, 10] as [number, number], y: [0, 1] as [number, number] };
    const path = toPath(
      [
        [0, 0],
        [10, 1],
      ],
      domain,
      100,
      50,
    );
    expect(path).toBe('M0.00,50.00 L100.00,0.00');
  });
});

describe('formatting', () => {
  it('rounds for display at 4 decimals', () => {
    expect(roundDisplay(0.123456)).toBe(0.1235);
    expect(roundDisplay(-0.00004)).toBe(-0);
  });

  it('formats probabilities as percentages', () => {
    expect(formatProbability(fx.predict('a').probability)).toMatch(/^\d+\.\d%$/);
    expect(formatProbability(0.1234)).toBe('12.3%');
  });
});
