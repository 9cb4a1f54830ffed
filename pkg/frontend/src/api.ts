/**
 * Typed client for the search service. All numeric work happens server-side;
 * this module only moves JSON.
 */

import type { WirePoint } from "./strokes.js";

export interface ResultItem {
  id: number;
  distance: number;
  thumb_url: string;
}

export interface ClusterPayload {
  member_ids: number[];
  representative_id: number;
  target_points: WirePoint[];
  thumb_urls: string[];
}

export interface SearchResponse {
  session_id: string;
  iteration: number;
  results: ResultItem[];
  clusters: ClusterPayload[];
}

export interface PerturbResponse {
  method: string;
  suggestion_points: WirePoint[];
  morph_frames: WirePoint[][];
  loss_trace: number[];
  distances_before: number[];
  distances_after: number[];
  iteration: number;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class SearchClient {
  private sessionId: string | null = null;

  constructor(private baseUrl: string, private fetchImpl: FetchLike = fetch) {}

  get session(): string | null {
    return this.sessionId;
  }

  private async post<T>(path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.text());
    }
    return (await resp.json()) as T;
  }

  async openSession(): Promise<string> {
    const out = await this.post<{ session_id: string }>("/api/session");
    this.sessionId = out.session_id;
    return out.session_id;
  }

  private async ensureSession(): Promise<string> {
    return this.sessionId ?? (await this.openSession());
  }

  async search(points: WirePoint[], k?: number, m?: number): Promise<SearchResponse> {
    const sid = await this.ensureSession();
    return this.post<SearchResponse>(`/api/session/${sid}/search`, { points, k, m });
  }

  async perturb(weights: number[], method: string): Promise<PerturbResponse> {
    const sid = await this.ensureSession();
    return this.post<PerturbResponse>(`/api/session/${sid}/perturb`, { weights, method });
  }

  async accept(): Promise<WirePoint[]> {
    const sid = await this.ensureSession();
    const out = await this.post<{ query_points: WirePoint[] }>(`/api/session/${sid}/accept`);
    return out.query_points;
  }

  async replaceQuery(points: WirePoint[]): Promise<void> {
    const sid = await this.ensureSession();
    await this.post(`/api/session/${sid}/query`, { points });
  }

  async health(): Promise<{ status: string; indexed: number }> {
    const resp = await this.fetchImpl(this.baseUrl + "/api/health");
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return (await resp.json()) as { status: string; indexed: number };
  }
}
