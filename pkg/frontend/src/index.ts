export { MemoryClient } from './client.js';
export type { ClientOptions, IngestStreamOptions, QueryOptions } from './client.js';
export {
  ApiError,
  AuthError,
  ConflictError,
  DecodeError,
  NotFoundError,
  StreamOrderError,
  TransportError,
  ValidationError,
} from './errors.js';
export { chunkWindows, groupByWindow, toNdjson, validateOrdering } from './events.js';
export { HttpSession } from './http.js';
export type { FetchLike, HttpOptions } from './http.js';
export {
  AnswerResultSchema,
  GraphStatsSchema,
  IngestReportSchema,
  NodeViewSchema,
  PersonSchema,
  decodeAnswerResult,
  decodeGraphStats,
  decodeIngestReport,
  decodeNodeView,
  decodePersons,
  encode,
} from './types.js';
export type {
  AnswerResult,
  EvidenceContext,
  GraphStats,
  IngestReport,
  NodeView,
  Person,
  StreamEvent,
  TurnRecord,
  Verdict,
} from './types.js';
