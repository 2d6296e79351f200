import { readFileSync } from 'node:fs';
import { join } from 'node:path';

import { describe, expect, it } from 'vitest';

import { DecodeError } from '../src/errors.js';
import {
  decodeAnswerResult,
  decodeGraphStats,
  encode,
  type AnswerResult,
} from '../src/types.js';

const fixture = (name: string): unknown =>
  JSON.parse(readFileSync(join(__dirname, 'fixtures', name), 'utf-8'));

/** Small deterministic PRNG so the property suite is reproducible. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randomAnswerResult(rand: () => number): Record<string, unknown> {
  const nodeId = () => `f-${Math.floor(rand() * 200)}`;
  const ids = (n: number) => Array.from({ length: n }, nodeId);
  const maybeExtras = (target: Record<string, unknown>) => {
    if (rand() < 0.5) target[`x_${Math.floor(rand() * 10)}`] = Math.floor(rand() * 99);
    if (rand() < 0.2) target.nested_extra = { deep: [rand() < 0.5, 'text'] };
    return target;
  };
  const turns = Math.floor(rand() * 4);
  const answered = rand() < 0.5;
  const trace = Array.from({ length: turns + 1 }, (_, i) => {
    const expanded = ids(1 + Math.floor(rand() * 6));
    const keep = expanded.slice(0, 1 + Math.floor(rand() * expanded.length));
    const last = i === turns && answered;
    return maybeExtras({
      turn: i,
      expanded,
      pruned_in: keep,
      verdict: maybeExtras(last
        ? { kind: 'answer', text: `answer ${Math.floor(rand() * 50)}` }
        : { kind: 'expand', text: null }),
      elapsed: Math.round(rand() * 1000) / 1000,
    });
  });
  const nodes = ids(2 + Math.floor(rand() * 8));
  return maybeExtras({
    answer: answered ? 'some answer' : null,
    turns_used: turns + 1,
    terminated_by: answered ? 'sufficient' : 'max_turns',
    context: maybeExtras({ nodes, frontier: nodes.slice(0, 2), turn: turns }),
    trace,
  });
}

describe('golden fixtures from the live service', () => {
  it('decodes the recorded answer result faithfully', () => {
    const raw = fixture('answer_result.json');
    const decoded = decodeAnswerResult(raw);
    expect(decoded.terminated_by).toBe('sufficient');
    expect(decoded.answer).toBe('kettle whistle begins');
    expect(decoded.trace[0].verdict.kind).toBe('answer');
    expect(decoded.context.nodes).toContain('f-3');
    // decoded value is the raw document, typed
    expect(encode(decoded)).toEqual(raw);
  });

  it('decodes the recorded graph stats', () => {
    const stats = decodeGraphStats(fixture('graph_stats.json'));
    expect(stats.facts).toBe(6);
    expect(stats.clips).toBe(2);
    expect(stats.links['relational']).toBe(4);
  });
});

describe('round-trip fidelity', () => {
  it('decode(encode(x)) === x over generated instances with unknown fields', () => {
    const rand = mulberry32(20240817);
    for (let i = 0; i < 250; i++) {
      const wire = randomAnswerResult(rand);
      const decoded = decodeAnswerResult(wire);
      expect(encode(decoded)).toEqual(wire);
      expect(decodeAnswerResult(encode(decoded))).toEqual(decoded);
    }
  });

  it('preserves unknown fields at every level', () => {
    const raw = fixture('answer_result.json') as Record<string, unknown>;
    raw.server_build = 'v9.9';
    (raw.context as Record<string, unknown>).future_field = [1, 2, 3];
    const decoded = decodeAnswerResult(raw);
    expect((decoded as Record<string, unknown>).server_build).toBe('v9.9');
    expect(encode(decoded)).toEqual(raw);
  });
});

describe('decode failures', () => {
  it('names the offending field', () => {
    const raw = fixture('answer_result.json') as Record<string, unknown>;
    delete raw.turns_used;
    expect(() => decodeAnswerResult(raw)).toThrowError(DecodeError);
    expect(() => decodeAnswerResult(raw)).toThrowError(/turns_used/);
  });

  it('rejects wrong verdict kinds', () => {
    const raw = fixture('answer_result.json') as {
      trace: { verdict: { kind: string } }[];
    };
    raw.trace[0].verdict.kind = 'shrug';
    expect(() => decodeAnswerResult(raw)).toThrowError(/verdict.kind/);
  });
});
