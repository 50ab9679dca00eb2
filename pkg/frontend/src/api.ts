/** HTTP client for the session service.
 *
 * Thin client discipline: policy truth lives server-side, and at most one
 * mutating request is in flight at a time, mirroring the service's busy
 * semantics instead of racing them.
 */

import type {
  AnalyzeView,
  ClarifyView,
  InsightCardWire,
  LedgerEntryWire,
  RawShapeWire,
  RippleSummaryWire,
  SessionView,
  Stage,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class MutationInFlight extends Error {
  constructor() {
    super("another mutating request is still in flight");
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private mutating = false;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, init: RequestInit = {}): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, { method, ...init });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  private async mutate<T>(method: string, path: string, init: RequestInit = {}): Promise<T> {
    if (this.mutating) throw new MutationInFlight();
    this.mutating = true;
    try {
      return await this.request<T>(method, path, init);
    } finally {
      this.mutating = false;
    }
  }

  private json(body: unknown): RequestInit {
    return {
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    };
  }

  createSession(scenarioContext: string): Promise<SessionView> {
    return this.mutate("POST", "/sessions", this.json({ scenarioContext }));
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  getSketch(sessionId: string): Promise<{ shapes: RawShapeWire[] }> {
    return this.request("GET", `/sessions/${sessionId}/sketch`);
  }

  putSketch(sessionId: string, shapes: RawShapeWire[]): Promise<{ shapes: RawShapeWire[] }> {
    return this.mutate("PUT", `/sessions/${sessionId}/sketch`, this.json({ shapes }));
  }

  identify(sessionId: string, rawPng: Blob, numberedPng: Blob): Promise<unknown> {
    const form = new FormData();
    form.append("raw", rawPng, "raw.png");
    form.append("numbered", numberedPng, "numbered.png");
    return this.mutate("POST", `/sessions/${sessionId}/identify`, { body: form });
  }

  analyze(sessionId: string, somPng: Blob): Promise<AnalyzeView> {
    const form = new FormData();
    form.append("som", somPng, "som.png");
    return this.mutate("POST", `/sessions/${sessionId}/analyze`, { body: form });
  }

  clarify(sessionId: string, cardId: string, message: string): Promise<ClarifyView> {
    return this.mutate(
      "POST",
      `/sessions/${sessionId}/insights/${cardId}/clarify`,
      this.json({ message }),
    );
  }

  acceptInsight(sessionId: string, cardId: string): Promise<LedgerEntryWire> {
    return this.mutate("POST", `/sessions/${sessionId}/insights/${cardId}/accept`);
  }

  dismissInsight(sessionId: string, cardId: string): Promise<LedgerEntryWire> {
    return this.mutate("POST", `/sessions/${sessionId}/insights/${cardId}/dismiss`);
  }

  patchPolicy(
    sessionId: string,
    policyNumber: string,
    field: string,
    value: string,
  ): Promise<RippleSummaryWire> {
    return this.mutate(
      "PATCH",
      `/sessions/${sessionId}/policies/${policyNumber}`,
      this.json({ field, value }),
    );
  }

  setStage(sessionId: string, target: Stage): Promise<SessionView> {
    return this.mutate("POST", `/sessions/${sessionId}/stage`, this.json({ target }));
  }

  runTest(sessionId: string): Promise<{ vignettes: InsightCardWire[] }> {
    return this.mutate("POST", `/sessions/${sessionId}/test`);
  }

  sketchProposal(sessionId: string, accept: boolean): Promise<{ applied: boolean; accepted: boolean }> {
    return this.mutate("POST", `/sessions/${sessionId}/sketch-proposal`, this.json({ accept }));
  }

  applyShadow(sessionId: string, accept: boolean): Promise<{ applied: boolean }> {
    return this.mutate("POST", `/sessions/${sessionId}/shadow`, this.json({ accept }));
  }

  exportSession(sessionId: string): Promise<unknown> {
    return this.request("GET", `/sessions/${sessionId}/export`);
  }
}
