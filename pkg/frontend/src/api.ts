/**
 * Typed client for the synthesis service.
 *
 * Previews run one at a time: issuing a new one aborts the in-flight
 * request, and a response that has been superseded resolves to null so
 * the caller never paints stale data.
 */

import type { RleMask } from "./rle.js";

export interface SessionInfo {
  session_id: string;
  width: number;
  height: number;
  foreground_pixels: number;
  contour: [number, number][];
}

export interface MetricRow {
  symbol: string;
  direction: "+" | "-";
  value: number | null;
  reason?: string;
}

export interface PreviewResponse {
  session_id: string;
  contour: [number, number][];
  mask_rle: RleMask;
  metrics: MetricRow[];
}

export interface FieldProblem {
  field: string;
  message: string;
}

/** Structured service failure: engine errors carry the pipeline stage. */
export class ServiceError extends Error {
  status: number;
  stage?: string;
  problems?: FieldProblem[];

  constructor(status: number, message: string, stage?: string, problems?: FieldProblem[]) {
    super(message);
    this.status = status;
    this.stage = stage;
    this.problems = problems;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let message = `service error (HTTP ${res.status})`;
  let stage: string | undefined;
  let problems: FieldProblem[] | undefined;
  try {
    const body = await res.json();
    if (typeof body.message === "string") message = body.message;
    if (typeof body.stage === "string") stage = body.stage;
    if (Array.isArray(body.validation_errors)) problems = body.validation_errors;
  } catch {
    /* non-JSON error body; keep the generic message */
  }
  throw new ServiceError(res.status, message, stage, problems);
}

export class ApiClient {
  private baseUrl: string;
  private fetchFn: FetchLike;
  private inflight: AbortController | null = null;
  private requestToken = 0;

  constructor(baseUrl = "", fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  async createSession(file: Blob, filename = "truth.png"): Promise<SessionInfo> {
    const form = new FormData();
    form.append("file", file, filename);
    const res = await this.fetchFn(`${this.baseUrl}/sessions`, {
      method: "POST",
      body: form,
    });
    await raiseForStatus(res);
    return res.json();
  }

  async getSession(sessionId: string): Promise<SessionInfo> {
    const res = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}`);
    await raiseForStatus(res);
    return res.json();
  }

  /**
   * Run a preview; null means this request was superseded (or aborted)
   * and its response must be ignored.
   */
  async preview(sessionId: string, body: object): Promise<PreviewResponse | null> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const token = ++this.requestToken;
    let res: Response;
    try {
      res = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/preview`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
        signal: controller.signal,
      });
    } catch (err) {
      if ((err as Error).name === "AbortError") return null;
      throw err;
    }
    if (token !== this.requestToken) return null;
    await raiseForStatus(res);
    const payload: PreviewResponse = await res.json();
    return token === this.requestToken ? payload : null;
  }

  async exportZip(sessionId: string, body: object): Promise<Blob> {
    const res = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/export`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    await raiseForStatus(res);
    return res.blob();
  }
}
