/**
 * Minimal fetch wrapper with the SDK's retry discipline:
 * - idempotent GETs retry on 429/5xx/network errors with linear backoff;
 * - POSTs never retry unless the caller marks the request idempotent
 *   (the query endpoint does, via a client-generated Idempotency-Key);
 * - every request carries a timeout via AbortController.
 */

import { TransportError, errorForStatus } from './errors.js';

export type FetchLike = (url: string, init: RequestInit) => Promise<Response>;

export interface HttpOptions {
  baseUrl: string;
  token?: string;
  timeoutMs?: number;
  retries?: number;
  retryBaseMs?: number;
  fetchImpl?: FetchLike;
}

export interface RequestOptions {
  body?: unknown;
  rawBody?: string;
  contentType?: string;
  idempotencyKey?: string;
  query?: Record<string, string | number | undefined>;
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export class HttpSession {
  private readonly baseUrl: string;
  private readonly token?: string;
  private readonly timeoutMs: number;
  private readonly retries: number;
  private readonly retryBaseMs: number;
  private readonly fetchImpl: FetchLike;

  constructor(options: HttpOptions) {
    this.baseUrl = options.baseUrl.replace(/\/+$/, '');
    this.token = options.token;
    this.timeoutMs = options.timeoutMs ?? 30_000;
    this.retries = options.retries ?? 2;
    this.retryBaseMs = options.retryBaseMs ?? 100;
    this.fetchImpl = options.fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private url(path: string, query?: RequestOptions['query']): string {
    let url = this.baseUrl + path;
    if (query) {
      const params = Object.entries(query)
        .filter(([, v]) => v !== undefined)
        .map(([k, v]) => `${encodeURIComponent(k)}=${encodeURIComponent(String(v))}`);
      if (params.length) url += '?' + params.join('&');
    }
    return url;
  }

  private headers(options: RequestOptions): Record<string, string> {
    const headers: Record<string, string> = {};
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    if (options.idempotencyKey) headers['Idempotency-Key'] = options.idempotencyKey;
    if (options.body !== undefined) {
      headers['Content-Type'] = 'application/json';
    } else if (options.rawBody !== undefined) {
      headers['Content-Type'] = options.contentType ?? 'application/x-ndjson';
    }
    return headers;
  }

  private async attempt(method: string, path: string,
                        options: RequestOptions): Promise<Response> {
    const controller = new AbortController();
    const timer = setTimeout(() => controller.abort(), this.timeoutMs);
    try {
      return await this.fetchImpl(this.url(path, options.query), {
        method,
        headers: this.headers(options),
        body: options.body !== undefined
          ? JSON.stringify(options.body)
          : options.rawBody,
        signal: controller.signal,
      });
    } finally {
      clearTimeout(timer);
    }
  }

  /** Run one request; retryable requests get retries + 1 total attempts. */
  async request(method: string, path: string,
                options: RequestOptions = {}): Promise<unknown> {
    const retryable = method === 'GET' || options.idempotencyKey !== undefined;
    const attempts = retryable ? this.retries + 1 : 1;
    let lastError: unknown;
    for (let attempt = 0; attempt < attempts; attempt++) {
      if (attempt > 0) await sleep(this.retryBaseMs * attempt);
      let response: Response;
      try {
        response = await this.attempt(method, path, options);
      } catch (cause) {
        lastError = new TransportError(`${method} ${path} failed: ${cause}`, cause);
        continue;
      }
      if (response.status === 429 || response.status >= 500) {
        lastError = errorForStatus(response.status,
          `${method} ${path}: HTTP ${response.status}`,
          await response.text().catch(() => undefined));
        continue;
      }
      if (!response.ok) {
        const bodyText = await response.text().catch(() => '');
        let detail: unknown = bodyText;
        try {
          detail = JSON.parse(bodyText).detail ?? bodyText;
        } catch {
          /* keep raw text */
        }
        throw errorForStatus(response.status,
          `${method} ${path}: ${typeof detail === 'string' ? detail : JSON.stringify(detail)}`,
          detail);
      }
      const text = await response.text();
      if (!text) return undefined;
      try {
        return JSON.parse(text);
      } catch (cause) {
        throw new TransportError(`${method} ${path}: invalid JSON body`, cause);
      }
    }
    throw lastError instanceof Error
      ? lastError
      : new TransportError(`${method} ${path} failed`);
  }
}
