// Thin typed client for the JSON API. Every mutation can carry an
// idempotency key so flaky connections never double-apply.

import type {
  AnnotateReport,
  ApiError,
  ConcordancePayload,
  DimensionBooksPayload,
  EffectsPayload,
  ExpectationEntry,
  ExpectationsResponse,
  ProjectSummary,
  RatingsResponse,
  RecommendationPayload,
} from "./types.js";

export class ApiFailure extends Error {
  constructor(public status: number, public body: ApiError) {
    super(`${body.error}: ${body.detail}`);
  }
}

export class Client {
  constructor(private baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown,
                           idempotencyKey?: string): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (idempotencyKey) headers["Idempotency-Key"] = idempotencyKey;
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await resp.json();
    if (!resp.ok) throw new ApiFailure(resp.status, payload as ApiError);
    return payload as T;
  }

  project(): Promise<ProjectSummary> {
    return this.request("GET", "/api/project");
  }

  uploadRatingsCsv(csv: string, format = "auto"): Promise<RatingsResponse> {
    return this.request("POST", "/api/ratings", { csv, format });
  }

  uploadRatingRows(rows: object[], idempotencyKey?: string): Promise<RatingsResponse> {
    return this.request("POST", "/api/ratings", { rows }, idempotencyKey);
  }

  annotate(): Promise<AnnotateReport> {
    return this.request("POST", "/api/annotate", {});
  }

  effects(): Promise<EffectsPayload> {
    return this.request("GET", "/api/effects");
  }

  registerExpectations(expectations: Record<string, ExpectationEntry>,
                       postHoc = false): Promise<ExpectationsResponse> {
    return this.request("POST", "/api/expectations",
                        { expectations, post_hoc: postHoc });
  }

  concordance(): Promise<ConcordancePayload> {
    return this.request("GET", "/api/concordance");
  }

  setMask(excluded: string[], idempotencyKey?: string): Promise<{ mask: { excluded: string[] } }> {
    return this.request("POST", "/api/mask", { excluded }, idempotencyKey);
  }

  recommend(candidatesCsv: string, k = 5): Promise<RecommendationPayload> {
    return this.request("POST", "/api/recommend",
                        { candidates_csv: candidatesCsv, k });
  }

  explore(candidatesCsv: string, k = 5): Promise<RecommendationPayload> {
    return this.request("POST", "/api/explore",
                        { candidates_csv: candidatesCsv, k });
  }

  dimensionBooks(dimensionId: string): Promise<DimensionBooksPayload> {
    return this.request("GET",
      `/api/dimension-books?dimension_id=${encodeURIComponent(dimensionId)}`);
  }
}
