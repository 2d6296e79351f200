export class ApiError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(message: string, status: number, detail?: unknown) {
    super(message);
    this.name = 'ApiError';
    this.status = status;
    this.detail = detail;
  }
}

export class NotFoundError extends ApiError {
  constructor(message: string, detail?: unknown) {
    super(message, 404, detail);
    this.name = 'NotFoundError';
  }
}

export class ConflictError extends ApiError {
  constructor(message: string, detail?: unknown) {
    super(message, 409, detail);
    this.name = 'ConflictError';
  }
}

export class ValidationError extends ApiError {
  constructor(message: string, detail?: unknown) {
    super(message, 422, detail);
    this.name = 'ValidationError';
  }
}

export class AuthError extends ApiError {
  constructor(message: string, detail?: unknown) {
    super(message, 401, detail);
    this.name = 'AuthError';
  }
}

/** Network failure or timeout: nothing useful came back from the server. */
export class TransportError extends Error {
  readonly cause?: unknown;

  constructor(message: string, cause?: unknown) {
    super(message);
    this.name = 'TransportError';
    this.cause = cause;
  }
}

/** The server answered 2xx but the body does not match the wire schema. */
export class DecodeError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'DecodeError';
  }
}

/** Client-side input rejection raised before any network call. */
export class StreamOrderError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'StreamOrderError';
  }
}

export function errorForStatus(status: number, message: string, detail?: unknown): ApiError {
  switch (status) {
    case 401:
      return new AuthError(message, detail);
    case 404:
      return new NotFoundError(message, detail);
    case 409:
      return new ConflictError(message, detail);
    case 422:
      return new ValidationError(message, detail);
    default:
      return new ApiError(message, status, detail);
  }
}
