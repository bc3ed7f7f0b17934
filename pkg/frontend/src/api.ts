import type { Answer, ApiError } from "./types";

export type QueryResult =
  | { ok: true; answer: Answer }
  | { ok: false; status: number; error: ApiError };

/** Thin typed client over the documented JSON endpoints. */
export class ApiClient {
  constructor(private baseUrl = "") {}

  async query(text: string, mode = "deterministic"): Promise<QueryResult> {
    let resp: Response;
    try {
      resp = await fetch(`${this.baseUrl}/api/query`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ text, mode }),
      });
    } catch (e) {
      return {
        ok: false,
        status: 0,
        error: { error: "NetworkFailure", detail: String(e) },
      };
    }
    const body = await resp.json();
    if (!resp.ok) {
      return { ok: false, status: resp.status, error: body as ApiError };
    }
    return { ok: true, answer: body as Answer };
  }

  async health(): Promise<{ status: string; corpus_size: number } | null> {
    try {
      const resp = await fetch(`${this.baseUrl}/api/health`);
      return resp.ok ? await resp.json() : null;
    } catch {
      return null;
    }
  }
}
