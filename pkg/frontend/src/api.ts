/**
 * Service client with per-endpoint request cancellation and a debounce
 * helper, so slider drags settle into exactly one request per endpoint.
 */

import type {
  ContributionsResponse,
  CurveResponse,
  Payload,
  PredictResponse,
  SchemaResponse,
} from './types.js';

export class ServiceError extends Error {
  constructor(
    public status: number,
    message: string,
    public fields?: Record<string, string>,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ServiceClient {
  private inflight = new Map<string, AbortController>();

  constructor(
    private base = '',
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  /** Abort any in-flight request with the same key before starting. */
  private controller(key: string): AbortController {
    this.inflight.get(key)?.abort();
    const controller = new AbortController();
    this.inflight.set(key, controller);
    return controller;
  }

  private async request<T>(
    key: string,
    path: string,
    init?: RequestInit,
  ): Promise<T> {
    const controller = this.controller(key);
    const resp = await this.fetchImpl(this.base + path, {
      ...init,
      signal: controller.signal,
    });
    const body = await resp.json();
    if (!resp.ok) {
      throw new ServiceError(resp.status, body.error ?? 'request failed', body.fields);
    }
    return body as T;
  }

  private post<T>(key: string, path: string, payload: unknown): Promise<T> {
    return this.request<T>(key, path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
  }

  schema(): Promise<SchemaResponse> {
    return this.request<SchemaResponse>('schema', '/schema');
  }

  predict(profileKey: string, payload: Payload): Promise<PredictResponse> {
    return this.post(`predict:${profileKey}`, '/predict', payload);
  }

  contributions(profileKey: string, payload: Payload): Promise<ContributionsResponse> {
    return this.post(`contributions:${profileKey}`, '/contributions', payload);
  }

  curve(
    profileKey: string,
    feature: string,
    payload: Payload,
    points = 50,
  ): Promise<CurveResponse> {
    return this.post(`curve:${profileKey}`, '/curve', { feature, payload, points });
  }
}

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
  flush(): void;
}

/** Trailing-edge debounce; default delay matches slider settle time. */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  delayMs = 150,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let pending: A | null = null;
  const wrapped = (...args: A) => {
    pending = args;
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      const args2 = pending!;
      pending = null;
      fn(...args2);
    }, delayMs);
  };
  wrapped.cancel = () => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
    pending = null;
  };
  wrapped.flush = () => {
    if (timer !== null && pending !== null) {
      clearTimeout(timer);
      const args = pending;
      timer = null;
      pending = null;
      fn(...args);
    }
  };
  return wrapped;
}

/** True for fetch aborts triggered by request supersession. */
export function isAbort(err: unknown): boolean {
  return err instanceof DOMException && err.name === 'AbortError';
}
