/** Typed client for the annotation service's HTTP endpoints. */

export interface BudgetInfo {
  unit: "words" | "sentences";
  amount: number;
}

export type SessionPhase = "idle" | "awaiting_annotations" | "training";

export interface SessionCreated {
  id: string;
  round: number;
  state: SessionPhase;
}

export interface SessionState {
  id: string;
  state: SessionPhase;
  strategy: string;
  budget: BudgetInfo;
  round: number;
  words_labeled: number;
  sentences_labeled: number;
  label_set: string[];
  test_f1: number | null;
  last_error: string | null;
  pending_ids: number[] | null;
  truncated: boolean;
}

export interface BatchSequence {
  id: number;
  tokens: string[];
  suggested: string[];
}

export interface PendingBatch {
  round: number;
  strategy: string;
  total_words: number;
  sequences: BatchSequence[];
}

export interface CurvePoint {
  round: number;
  words: number;
  sentences: number;
  precision: number;
  recall: number;
  f1: number;
}

/** Matches the curve CSV header written by the experiment runner. */
export const CURVE_CSV_HEADER = "round,words,sentences,precision,recall,f1";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: unknown,
  ) {
    super(`HTTP ${status}`);
  }

  /** Per-field messages from an error payload, however nested. */
  get fieldErrors(): Record<string, unknown> {
    const detail = unwrap(this.body);
    if (detail && typeof detail === "object" && "errors" in detail) {
      const errors = (detail as { errors: unknown }).errors;
      if (errors && typeof errors === "object") {
        return errors as Record<string, unknown>;
      }
    }
    return {};
  }
}

function unwrap(body: unknown): unknown {
  if (body && typeof body === "object" && "detail" in body) {
    return (body as { detail: unknown }).detail;
  }
  return body;
}

async function request<T>(
  method: string,
  url: string,
  payload?: unknown,
): Promise<{ status: number; data: T }> {
  const init: RequestInit = { method, headers: {} };
  if (payload !== undefined) {
    init.headers = { "content-type": "application/json" };
    init.body = JSON.stringify(payload);
  }
  const response = await fetch(url, init);
  const text = await response.text();
  let data: unknown = text;
  const kind = response.headers.get("content-type") ?? "";
  if (kind.includes("application/json")) {
    data = text ? JSON.parse(text) : null;
  }
  if (!response.ok) {
    throw new ApiError(response.status, data);
  }
  return { status: response.status, data: data as T };
}

/** Submission outcome: 200 carries the round record, 202 a training handle. */
export interface SubmitResult {
  status: number;
  body: Record<string, unknown>;
}

export class Client {
  constructor(readonly base: string = "") {}

  async createSession(config: unknown): Promise<SessionCreated> {
    const r = await request<SessionCreated>("POST", `${this.base}/sessions`, config);
    return r.data;
  }

  async getState(id: string): Promise<SessionState> {
    const r = await request<SessionState>("GET", `${this.base}/sessions/${id}/state`);
    return r.data;
  }

  async queryBatch(id: string): Promise<PendingBatch> {
    const r = await request<PendingBatch>("POST", `${this.base}/sessions/${id}/query`);
    return r.data;
  }

  async getPendingBatch(id: string): Promise<PendingBatch> {
    const r = await request<PendingBatch>("GET", `${this.base}/sessions/${id}/batch`);
    return r.data;
  }

  async submitAnnotations(
    id: string,
    labels: Record<string, string[]>,
  ): Promise<SubmitResult> {
    const r = await request<Record<string, unknown>>(
      "POST",
      `${this.base}/sessions/${id}/annotations`,
      { labels },
    );
    return { status: r.status, body: r.data };
  }

  async curveCsv(id: string): Promise<string> {
    const r = await request<string>(
      "GET",
      `${this.base}/sessions/${id}/curve?format=csv`,
    );
    return r.data;
  }
}

/** Parse the experiment runner's curve CSV; rejects any other layout. */
export function parseCurveCsv(text: string): CurvePoint[] {
  const lines = text.trim().split(/\r?\n/);
  if (lines[0] !== CURVE_CSV_HEADER) {
    throw new Error(`unexpected curve header: ${lines[0]}`);
  }
  return lines.slice(1).map((line) => {
    const cells = line.split(",");
    if (cells.length !== 6) {
      throw new Error(`malformed curve row: ${line}`);
    }
    return {
      round: Number(cells[0]),
      words: Number(cells[1]),
      sentences: Number(cells[2]),
      precision: Number(cells[3]),
      recall: Number(cells[4]),
      f1: Number(cells[5]),
    };
  });
}
