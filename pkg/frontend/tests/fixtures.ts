/** Loaders for captured service responses (real wire payloads, recorded
 * against fixed seeded models). */

import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import type {
  ContributionsResponse,
  CurveResponse,
  Payload,
  PredictResponse,
  SchemaResponse,
} from '../src/types.js';

const here = dirname(fileURLToPath(import.meta.url));

function load<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, 'fixtures', name), 'utf8')) as T;
}

export const schema = () => load<SchemaResponse>('schema.json');
export const profile = (tag: 'a' | 'b') => load<Payload>(`profile_${tag}.json`);
export const predict = (tag: 'a' | 'b') => load<PredictResponse>(`predict_${tag}.json`);
export const contributions = (tag: 'a' | 'b') =>
  load<ContributionsResponse>(`contributions_${tag}.json`);
export const contributionsMoved = () =>
  load<ContributionsResponse>('contributions_a_moved_dose_b.json');
export const curve = (feature: string, tag: 'a' | 'b') =>
  load<CurveResponse>(`curve_${feature}_${tag}.json`);
export const propCurve = (tag: 'a' | 'b') => load<CurveResponse>(`prop_curve_${tag}.json`);
export const propContributions = (tag: 'a' | 'b') =>
  load<ContributionsResponse>(`prop_contributions_${tag}.json`);

export const TV_FEATURES = ['vital_a', 'vital_b', 'dose_a', 'dose_b'];
