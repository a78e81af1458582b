import type { ItemPayload, ScoreSubmission, SessionMeta, SubmitResult, ReaderProgress } from "./types.js";

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

/** Thin typed client over the four session endpoints. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
    private readonly readerId: string,
    private readonly token?: string,
  ) {}

  private url(path: string, withReader = true): string {
    const url = new URL(`${this.baseUrl}/api/sessions/${this.sessionId}${path}`);
    if (withReader) url.searchParams.set("reader", this.readerId);
    if (this.token) url.searchParams.set("token", this.token);
    return url.toString();
  }

  private async get<T>(path: string, withReader = true): Promise<T> {
    const resp = await fetch(this.url(path, withReader));
    if (!resp.ok) throw new ApiError(`request failed: ${resp.status}`, resp.status);
    return (await resp.json()) as T;
  }

  sessionMeta(): Promise<SessionMeta> {
    return this.get<SessionMeta>("", false);
  }

  item(index: number): Promise<ItemPayload> {
    return this.get<ItemPayload>(`/items/${index}`);
  }

  progress(): Promise<ReaderProgress> {
    return this.get<ReaderProgress>("/progress");
  }

  async submitScores(itemIndex: number, submission: ScoreSubmission): Promise<SubmitResult> {
    const url = new URL(`${this.baseUrl}/api/sessions/${this.sessionId}/items/${itemIndex}/scores`);
    if (this.token) url.searchParams.set("token", this.token);
    const resp = await fetch(url.toString(), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(submission),
    });
    if (resp.status === 200) return { status: "accepted" };
    if (resp.status === 422) {
      const body = (await resp.json()) as { reason?: string };
      return { status: "rejected", reason: body.reason ?? "rejected" };
    }
    throw new ApiError(`submit failed: ${resp.status}`, resp.status);
  }
}
