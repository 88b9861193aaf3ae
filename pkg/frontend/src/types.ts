/** Wire types for the what-if service. */

export interface SchemaFeature {
  name: string;
  role: 'static' | 'time_varying';
  kind: 'numeric' | 'ordinal' | 'categorical';
  modifiable: boolean;
  units?: string | null;
  range?: [number, number];
  mean?: number;
  levels?: string[];
}

export interface SchemaResponse {
  features: SchemaFeature[];
  model_version: string;
}

export interface PredictResponse {
  probability: number;
  logit: number;
  model_version: string;
}

export interface ContributionsResponse {
  bias: number;
  contributions: Record<string, number>;
  logit: number;
  probability: number;
  weights: Record<string, number>;
  display: {
    bias: number;
    contributions: Record<string, number>;
  };
  model_version: string;
}

export interface CurveResponse {
  feature: string;
  x: number[];
  contribution: number[];
  centered: number[];
  current: { value: number | null; contribution: number };
  model_version: string;
}

export type PayloadValue = number | string | null;
export type Payload = Record<string, PayloadValue>;
