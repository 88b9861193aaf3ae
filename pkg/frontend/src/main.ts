/** Wires the what-if explorer: schema-driven controls, debounced service
 * calls (one /predict + one /contributions per settled change, plus the
 * selected feature's /curve), and a two-profile overlay. */

import { ServiceClient, debounce, isAbort } from './api.js';
import {
  renderBars,
  renderCurvePanel,
  renderGauges,
  renderSliders,
  renderStaticControls,
} from './render.js';
import {
  activeProfiles,
  addComparison,
  initialState,
  modifiableFeatures,
  removeComparison,
  staticFeatures,
  type AppState,
  type ProfileKey,
} from './state.js';

const client = new ServiceClient('');

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

async function refreshProfile(state: AppState, key: ProfileKey): Promise<void> {
  const profile = key === 'a' ? state.profiles.a : state.profiles.b;
  if (!profile) return;
  try {
    const [predict, contributions] = await Promise.all([
      client.predict(key, profile.values),
      client.contributions(key, profile.values),
    ]);
    profile.predict = predict;
    profile.contributions = contributions;
    if (state.selectedFeature) {
      const curve = await client.curve(key, state.selectedFeature, profile.values);
      profile.curves.set(state.selectedFeature, curve);
    }
  } catch (err) {
    if (!isAbort(err)) reportError(err);
    return;
  }
  paint(state);
}

function reportError(err: unknown): void {
  const banner = byId('errors');
  banner.textContent = err instanceof Error ? err.message : String(err);
  setTimeout(() => (banner.textContent = ''), 4000);
}

function paint(state: AppState): void {
  const profiles = activeProfiles(state);
  renderGauges(byId('gauges'), profiles);
  renderBars(byId('bars'), profiles);
  renderCurvePanel(byId('curve-panel'), state.selectedFeature, profiles);
  byId('compare-toggle').textContent = state.profiles.b
    ? 'remove profile B'
    : 'compare a second profile';
}

function bindControls(state: AppState, key: ProfileKey): void {
  const profile = key === 'a' ? state.profiles.a : state.profiles.b;
  if (!profile) return;
  const refresh = debounce(() => void refreshProfile(state, key), 150);
  // mutate in place: re-rendering the controls mid-drag would replace the
  // slider the user is holding
  const onSlider = (name: string, value: number | string) => {
    profile.values[name] = value;
    profile.curves.clear(); // every curve depends on the full payload
    refresh();
  };
  const onStatic = (name: string, value: number | string) => {
    onSlider(name, value);
  };
  const suffix = key === 'a' ? '' : '-b';
  renderStaticControls(
    byId(`statics${suffix}`), staticFeatures(state), profile, onStatic,
  );
  renderSliders(
    byId(`sliders${suffix}`),
    modifiableFeatures(state),
    profile,
    onSlider,
    (name) => {
      state.selectedFeature = name;
      void refreshCurves(state);
    },
    state.selectedFeature,
  );
}

async function refreshCurves(state: AppState): Promise<void> {
  const feature = state.selectedFeature;
  if (!feature) return;
  for (const profile of activeProfiles(state)) {
    if (!profile.curves.has(feature)) {
      try {
        const curve = await client.curve(profile.key, feature, profile.values);
        profile.curves.set(feature, curve);
      } catch (err) {
        if (!isAbort(err)) reportError(err);
      }
    }
  }
  paint(state);
}

async function boot(): Promise<void> {
  const schema = await client.schema();
  const state = initialState(schema);
  byId('model-version').textContent = `model ${schema.model_version}`;

  byId('compare-toggle').addEventListener('click', () => {
    const next = state.profiles.b ? removeComparison(state) : addComparison(state);
    state.profiles = next.profiles;
    byId('profile-b-controls').classList.toggle('hidden', !state.profiles.b);
    if (state.profiles.b) {
      bindControls(state, 'b');
      void refreshProfile(state, 'b');
    } else {
      paint(state); // profile A's cached responses stay as they are
    }
  });

  bindControls(state, 'a');
  paint(state);
  await refreshProfile(state, 'a');
}

boot().catch(reportError);
