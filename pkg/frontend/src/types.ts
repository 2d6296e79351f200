/**
 * Wire models for the memory-engine HTTP API.
 *
 * All schemas are loose objects: unknown fields coming from newer servers
 * are preserved through decode/encode, so old clients stay forward
 * compatible.  Decoded values are plain JSON data with static types on
 * the known fields.
 */

import { z } from 'zod';

import { DecodeError } from './errors.js';

export const VerdictSchema = z.looseObject({
  kind: z.enum(['answer', 'expand']),
  text: z.string().nullable(),
});

export const TurnRecordSchema = z.looseObject({
  turn: z.number().int(),
  expanded: z.array(z.string()),
  pruned_in: z.array(z.string()),
  verdict: VerdictSchema,
  elapsed: z.number(),
});

export const EvidenceContextSchema = z.looseObject({
  nodes: z.array(z.string()),
  frontier: z.array(z.string()),
  turn: z.number().int(),
});

export const AnswerResultSchema = z.looseObject({
  answer: z.string().nullable(),
  turns_used: z.number().int(),
  terminated_by: z.enum(['sufficient', 'max_turns']),
  context: EvidenceContextSchema,
  trace: z.array(TurnRecordSchema),
});

export const IngestReportSchema = z.looseObject({
  clips: z.number().int(),
  facts: z.number().int(),
  links: z.number().int(),
  cross_clip_links: z.number().int(),
  persons_created: z.number().int(),
  persons_updated: z.number().int(),
  global_version: z.number().int(),
  warnings: z.array(z.string()),
});

export const GraphStatsSchema = z.looseObject({
  facts: z.number().int(),
  clips: z.number().int(),
  persons: z.number().int(),
  global_version: z.number().int(),
  clips_integrated: z.number().int(),
  links: z.record(z.string(), z.number()),
  relational_degree_histogram: z.record(z.string(), z.number()),
});

export const LinkSchema = z.looseObject({
  target: z.string(),
  description: z.string(),
  weight: z.number(),
  kind: z.string(),
});

export const NodeViewSchema = z.looseObject({
  id: z.string(),
  level: z.enum(['fact', 'clip', 'global']),
  node: z.record(z.string(), z.unknown()),
  links: z.record(z.string(), z.array(LinkSchema)),
});

export const PersonSchema = z.looseObject({
  person_id: z.string(),
  face_centroid: z.array(z.number()),
  observation_count: z.number().int(),
  voice_refs: z.array(z.string()),
  profile: z.string(),
  evidence: z.array(z.string()),
});

export const PersonsResponseSchema = z.looseObject({
  persons: z.array(PersonSchema),
});

export type Verdict = z.infer<typeof VerdictSchema>;
export type TurnRecord = z.infer<typeof TurnRecordSchema>;
export type EvidenceContext = z.infer<typeof EvidenceContextSchema>;
export type AnswerResult = z.infer<typeof AnswerResultSchema>;
export type IngestReport = z.infer<typeof IngestReportSchema>;
export type GraphStats = z.infer<typeof GraphStatsSchema>;
export type NodeView = z.infer<typeof NodeViewSchema>;
export type Person = z.infer<typeof PersonSchema>;

/** One timed input event for ingestion. */
export interface StreamEvent {
  t: number;
  text: string;
  media?: string;
  names?: string[];
  scene?: string;
  [extra: string]: unknown;
}

export function decodeWith<T>(schema: z.ZodType<T>, value: unknown, what: string): T {
  const result = schema.safeParse(value);
  if (!result.success) {
    const issue = result.error.issues[0];
    const path = issue && issue.path.length ? issue.path.join('.') : '(root)';
    const message = issue ? issue.message : 'invalid';
    throw new DecodeError(`cannot decode ${what}: field '${path}': ${message}`);
  }
  return result.data;
}

export const decodeAnswerResult = (v: unknown) =>
  decodeWith(AnswerResultSchema, v, 'AnswerResult');
export const decodeIngestReport = (v: unknown) =>
  decodeWith(IngestReportSchema, v, 'IngestReport');
export const decodeGraphStats = (v: unknown) =>
  decodeWith(GraphStatsSchema, v, 'GraphStats');
export const decodeNodeView = (v: unknown) => decodeWith(NodeViewSchema, v, 'NodeView');
export const decodePersons = (v: unknown) =>
  decodeWith(PersonsResponseSchema, v, 'PersonsResponse').persons;

/**
 * Decoded values are plain JSON data (unknown fields included), so encoding
 * back to the wire is a deep copy; decode(encode(x)) === x structurally.
 */
export function encode<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}
