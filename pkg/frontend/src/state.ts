/**
 * Client state: up to two patient profiles (the blue/orange overlay pair),
 * their current feature values, and the latest service responses. All
 * numbers in the store came from the service verbatim.
 */

import type {
  ContributionsResponse,
  CurveResponse,
  Payload,
  PredictResponse,
  SchemaFeature,
  SchemaResponse,
} from './types.js';

export const PROFILE_COLORS: Record<ProfileKey, string> = {
  a: '#1f77b4',
  b: '#ff7f0e',
};

export type ProfileKey = 'a' | 'b';

export interface ProfileState {
  key: ProfileKey;
  label: string;
  color: string;
  values: Payload;
  predict: PredictResponse | null;
  contributions: ContributionsResponse | null;
  /** latest curve per feature; invalidated on any value change */
  curves: Map<string, CurveResponse>;
}

export interface AppState {
  schema: SchemaResponse | null;
  profiles: { a: ProfileState; b: ProfileState | null };
  selectedFeature: string | null;
}

export function defaultValue(feature: SchemaFeature): number | string | null {
  if (feature.levels && feature.levels.length) return feature.levels[0];
  if (feature.mean !== undefined) return feature.mean;
  return null;
}

export function newProfile(key: ProfileKey, label: string, schema: SchemaResponse): ProfileState {
  const values: Payload = {};
  for (const f of schema.features) values[f.name] = defaultValue(f);
  return {
    key,
    label,
    color: PROFILE_COLORS[key],
    values,
    predict: null,
    contributions: null,
    curves: new Map(),
  };
}

export function initialState(schema: SchemaResponse): AppState {
  const tv = schema.features.find((f) => f.modifiable);
  return {
    schema,
    profiles: { a: newProfile('a', 'profile A', schema), b: null },
    selectedFeature: tv ? tv.name : null,
  };
}

export function modifiableFeatures(state: AppState): SchemaFeature[] {
  return state.schema ? state.schema.features.filter((f) => f.modifiable) : [];
}

export function staticFeatures(state: AppState): SchemaFeature[] {
  return state.schema ? state.schema.features.filter((f) => !f.modifiable) : [];
}

/**
 * Change one feature value; returns the profile with its curve cache for
 * that profile invalidated (responses for the other profile are untouched,
 * so no refetch happens for it).
 */
export function setValue(profile: ProfileState, name: string, value: number | string | null): ProfileState {
  return {
    ...profile,
    values: { ...profile.values, [name]: value },
    curves: new Map(), // every curve depends on the full payload
  };
}

export function addComparison(state: AppState): AppState {
  if (state.profiles.b || !state.schema) return state;
  const b = newProfile('b', 'profile B', state.schema);
  b.values = { ...state.profiles.a.values };
  return { ...state, profiles: { ...state.profiles, b } };
}

/** Drop profile B; profile A's cached responses survive untouched. */
export function removeComparison(state: AppState): AppState {
  return { ...state, profiles: { a: state.profiles.a, b: null } };
}

export function activeProfiles(state: AppState): ProfileState[] {
  return state.profiles.b ? [state.profiles.a, state.profiles.b] : [state.profiles.a];
}
