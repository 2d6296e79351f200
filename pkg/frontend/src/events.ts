/**
 * Stream-side helpers for ingestion: client-side ordering validation and
 * clip-aligned chunking.
 *
 * The server assigns events to absolute half-open windows
 * [k*clipLen, (k+1)*clipLen), so uploads split at window boundaries land in
 * exactly the same clips as a single upload would.  That alignment is what
 * makes interrupted ingests resumable: the server's committed clip count
 * identifies precisely which windows are done.
 */

import { StreamOrderError } from './errors.js';
import type { StreamEvent } from './types.js';

export function validateOrdering(events: StreamEvent[]): void {
  for (let i = 1; i < events.length; i++) {
    if (events[i].t < events[i - 1].t) {
      throw new StreamOrderError(
        `event ${i} at t=${events[i].t} precedes event ${i - 1} at t=${events[i - 1].t}`);
    }
  }
  if (events.length > 0 && events[0].t < 0) {
    throw new StreamOrderError(`negative event time ${events[0].t}`);
  }
}

/** Group ordered events by absolute clip window, in stream order. */
export function groupByWindow(events: StreamEvent[], clipLen: number): StreamEvent[][] {
  const windows: StreamEvent[][] = [];
  let currentKey: number | null = null;
  for (const event of events) {
    const key = Math.floor(event.t / clipLen);
    if (key !== currentKey) {
      windows.push([]);
      currentKey = key;
    }
    windows[windows.length - 1].push(event);
  }
  return windows;
}

/** Concatenate windows into upload chunks of at most windowsPerChunk. */
export function chunkWindows(windows: StreamEvent[][],
                             windowsPerChunk: number): StreamEvent[][] {
  const chunks: StreamEvent[][] = [];
  for (let i = 0; i < windows.length; i += windowsPerChunk) {
    chunks.push(windows.slice(i, i + windowsPerChunk).flat());
  }
  return chunks;
}

export function toNdjson(events: StreamEvent[]): string {
  return events.map((e) => JSON.stringify(e)).join('\n') + '\n';
}
