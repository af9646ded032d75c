/** Thin fetch client for the monitor API. All state lives on the server; the
 * UI never recomputes scores or forecasts. */

import type {
  ApiErrorBody,
  DecisionRequest,
  DecisionResponse,
  ForecastPayload,
  KeywordsResponse,
  NeighborsResponse,
  ProjectionResponse,
  ProposalResponse,
  StateResponse,
} from "./types.js";

export class ApiRequestError extends Error {
  readonly status: number;
  readonly reason: string;
  readonly detail: string;

  constructor(status: number, body: ApiErrorBody | null) {
    super(body ? `${body.reason}: ${body.detail}` : `HTTP ${status}`);
    this.status = status;
    this.reason = body?.reason ?? "unknown";
    this.detail = body?.detail ?? "";
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string, private readonly fetchFn: typeof fetch = fetch) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      let body: ApiErrorBody | null = null;
      try {
        body = (await response.json()) as ApiErrorBody;
      } catch {
        body = null;
      }
      throw new ApiRequestError(response.status, body);
    }
    return (await response.json()) as T;
  }

  getState(): Promise<StateResponse> {
    return this.request("/state");
  }

  getKeywords(): Promise<KeywordsResponse> {
    return this.request("/keywords");
  }

  addKeyword(token: string): Promise<{ round: number; keywords: string[] }> {
    return this.request("/keywords", {
      method: "POST",
      body: JSON.stringify({ token }),
    });
  }

  removeKeyword(token: string): Promise<{ round: number; keywords: string[] }> {
    return this.request(`/keywords/${encodeURIComponent(token)}`, { method: "DELETE" });
  }

  getNeighbors(token: string, k = 30, wDistance = 1.0, wFrequency = 1.0): Promise<NeighborsResponse> {
    const params = new URLSearchParams({
      k: String(k),
      w_distance: String(wDistance),
      w_frequency: String(wFrequency),
    });
    return this.request(`/neighbors/${encodeURIComponent(token)}?${params}`);
  }

  getProjection(tokens: string[], method = "tsne"): Promise<ProjectionResponse> {
    const joined = tokens.map(encodeURIComponent).join(",");
    return this.request(`/projection?tokens=${joined}&method=${method}`);
  }

  getForecast(token: string, horizon = 15): Promise<ForecastPayload> {
    return this.request(`/forecast/${encodeURIComponent(token)}?h=${horizon}`);
  }

  getProposal(): Promise<ProposalResponse> {
    return this.request("/proposal");
  }

  postDecision(decision: DecisionRequest): Promise<DecisionResponse> {
    return this.request("/proposal/decision", {
      method: "POST",
      body: JSON.stringify(decision),
    });
  }

  advanceRound(): Promise<{ round: number; keywords: string[] }> {
    return this.request("/round/advance", { method: "POST" });
  }
}
