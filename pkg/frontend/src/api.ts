/** Thin HTTP client for the session API.
 *
 * Transport failures (network down, non-JSON response) become
 * TransportError so the app can offer a retry without losing the
 * pending response; structured service errors become ApiError with the
 * server's error code.
 */

import type {
  ApiErrorBody,
  CreatedSession,
  NextPayload,
  SubmitAck,
} from "./types.js";

export class TransportError extends Error {}

export class ApiError extends Error {
  code: string;
  status: number;

  constructor(code: string, detail: string, status: number) {
    super(detail);
    this.code = code;
    this.status = status;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** What the app needs from a client; tests substitute scripted fakes. */
export interface Api {
  createSession(kind?: string): Promise<CreatedSession>;
  nextItem(sessionId: string, nonce: string): Promise<NextPayload>;
  submitResponse(
    sessionId: string,
    itemId: string,
    symbols: string[],
    nonce: string,
  ): Promise<SubmitAck>;
  submitSurvey(
    sessionId: string,
    externalAid: boolean,
    nonce: string,
  ): Promise<unknown>;
}

export class ApiClient implements Api {
  private base: string;
  private fetchImpl: FetchLike;

  constructor(base = "", fetchImpl?: FetchLike) {
    this.base = base.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  async createSession(kind?: string): Promise<CreatedSession> {
    return this.request("POST", "/api/session", kind ? { kind } : {});
  }

  async nextItem(sessionId: string, nonce: string): Promise<NextPayload> {
    return this.request(
      "GET",
      `/api/session/${sessionId}/next?nonce=${encodeURIComponent(nonce)}`,
    );
  }

  async submitResponse(
    sessionId: string,
    itemId: string,
    symbols: string[],
    nonce: string,
  ): Promise<SubmitAck> {
    return this.request("POST", `/api/session/${sessionId}/response`, {
      item_id: itemId,
      symbols,
      nonce,
    });
  }

  async submitSurvey(
    sessionId: string,
    externalAid: boolean,
    nonce: string,
  ): Promise<unknown> {
    return this.request("POST", `/api/session/${sessionId}/survey`, {
      external_aid: externalAid,
      nonce,
    });
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.base + path, {
        method,
        headers: body === undefined ? {} : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new TransportError(`network failure: ${String(err)}`);
    }
    let doc: unknown;
    try {
      doc = await response.json();
    } catch {
      throw new TransportError(`non-JSON response (${response.status})`);
    }
    if (!response.ok) {
      const e = doc as ApiErrorBody;
      throw new ApiError(
        e.error ?? "Unknown",
        e.detail ?? `HTTP ${response.status}`,
        response.status,
      );
    }
    return doc as T;
  }
}
