/**
 * Typed client for the memory-engine HTTP service.
 *
 * The client performs no local reasoning: all retrieval semantics live
 * server-side, and every response is decoded into typed wire models with
 * unknown fields preserved.
 */

import { ApiError, ConflictError, TransportError } from './errors.js';
import { chunkWindows, groupByWindow, toNdjson, validateOrdering } from './events.js';
import { HttpSession, type HttpOptions } from './http.js';
import {
  type AnswerResult,
  type GraphStats,
  type IngestReport,
  type NodeView,
  type Person,
  type StreamEvent,
  decodeAnswerResult,
  decodeGraphStats,
  decodeIngestReport,
  decodeNodeView,
  decodePersons,
} from './types.js';

export interface ClientOptions extends HttpOptions {}

export interface QueryOptions {
  k?: number;
  maxTurns?: number;
  options?: string[];
}

export interface IngestStreamOptions {
  /** Window length in seconds; must match the store's configured value. */
  clipLen?: number;
  /** Clip windows per upload request. */
  windowsPerChunk?: number;
  /** Resume attempts after transient mid-stream failures. */
  maxResumes?: number;
}

export class MemoryClient {
  private readonly http: HttpSession;

  constructor(options: ClientOptions) {
    this.http = new HttpSession(options);
  }

  async health(): Promise<boolean> {
    const body = (await this.http.request('GET', '/healthz')) as { status?: string };
    return body?.status === 'ok';
  }

  async createStore(storeId: string, config: Record<string, unknown> = {}): Promise<void> {
    await this.http.request('POST', '/stores', {
      body: { store_id: storeId, config },
    });
  }

  async listStores(): Promise<string[]> {
    const body = (await this.http.request('GET', '/stores')) as { stores: string[] };
    return body.stores;
  }

  /**
   * Answer a question over a store.  Retried on transient failures under a
   * client-generated idempotency key (the only POST the session retries).
   */
  async query(storeId: string, question: string,
              options: QueryOptions = {}): Promise<AnswerResult> {
    const body: Record<string, unknown> = { question };
    if (options.k !== undefined) body.k = options.k;
    if (options.maxTurns !== undefined) body.max_turns = options.maxTurns;
    if (options.options !== undefined) body.options = options.options;
    const raw = await this.http.request('POST', `/stores/${storeId}/query`, {
      body,
      idempotencyKey: crypto.randomUUID(),
    });
    return decodeAnswerResult(raw);
  }

  async getNode(storeId: string, nodeId: string): Promise<NodeView> {
    return decodeNodeView(
      await this.http.request('GET', `/stores/${storeId}/nodes/${nodeId}`));
  }

  async graphStats(storeId: string): Promise<GraphStats> {
    return decodeGraphStats(
      await this.http.request('GET', `/stores/${storeId}/graph/stats`));
  }

  async persons(storeId: string): Promise<Person[]> {
    return decodePersons(
      await this.http.request('GET', `/stores/${storeId}/persons`));
  }

  /** Upload one pre-chunked NDJSON batch (no resume logic). */
  async ingestBatch(storeId: string, events: StreamEvent[],
                    clipLen?: number): Promise<IngestReport> {
    const raw = await this.http.request('POST', `/stores/${storeId}/ingest`, {
      rawBody: toNdjson(events),
      query: clipLen !== undefined ? { clip_len: clipLen } : undefined,
    });
    return decodeIngestReport(raw);
  }

  /**
   * Stream a whole event sequence in clip-aligned chunks.
   *
   * Ordering is validated before any network call.  On a transient failure
   * mid-stream the client asks the server how many clips are committed (the
   * last-acknowledged clip index), skips the windows already ingested, and
   * resumes from the first outstanding one, so an interrupted run converges
   * to exactly the same store as an uninterrupted one.  Conflicts (another
   * ingest running) are surfaced immediately.
   */
  async ingestStream(storeId: string, events: Iterable<StreamEvent>,
                     options: IngestStreamOptions = {}): Promise<IngestReport> {
    const ordered = [...events];
    validateOrdering(ordered);
    const clipLen = options.clipLen ?? 30;
    const windowsPerChunk = options.windowsPerChunk ?? 2;
    const maxResumes = options.maxResumes ?? 3;

    const windows = groupByWindow(ordered, clipLen);
    const total: IngestReport = {
      clips: 0, facts: 0, links: 0, cross_clip_links: 0,
      persons_created: 0, persons_updated: 0, global_version: 0, warnings: [],
    };
    if (windows.length === 0) return total;

    const before = await this.graphStats(storeId);
    let nextWindow = 0;
    let resumes = 0;
    while (nextWindow < windows.length) {
      const take = Math.min(windowsPerChunk, windows.length - nextWindow);
      const chunk = chunkWindows(windows.slice(nextWindow, nextWindow + take), take)[0];
      try {
        const report = await this.ingestBatch(storeId, chunk, options.clipLen);
        total.persons_updated += report.persons_updated;
        total.warnings.push(...report.warnings);
        nextWindow += take;
      } catch (error) {
        if (error instanceof ConflictError) throw error;
        const transient = error instanceof TransportError ||
          (error instanceof ApiError && (error.status >= 500 || error.status === 429));
        if (!transient || resumes >= maxResumes) throw error;
        resumes += 1;
        // Last-acknowledged clip index: clips commit one whole window at a
        // time, so the server's clip count says exactly where to resume.
        const stats = await this.graphStats(storeId);
        nextWindow = stats.clips - before.clips;
        total.warnings.push(
          `resumed after transient failure from window ${nextWindow}`);
      }
    }
    // Authoritative totals come from stats deltas, which stay correct even
    // when a failed request committed a partial prefix before dying.
    const after = await this.graphStats(storeId);
    total.clips = after.clips - before.clips;
    total.facts = after.facts - before.facts;
    total.links = (after.links['relational'] ?? 0) - (before.links['relational'] ?? 0);
    total.cross_clip_links =
      (after.links['cross-clip'] ?? 0) - (before.links['cross-clip'] ?? 0);
    total.persons_created = after.persons - before.persons;
    total.global_version = after.global_version;
    return total;
  }
}
