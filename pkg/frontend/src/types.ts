// Payload types mirroring the server's JSON API (docs/api.md in the backend
// repo). The UI renders these fields verbatim and never recomputes statistics.

export interface DimensionInfo {
  id: string;
  label: string;
  group: string;
  kind: string;
}

export interface ProjectSummary {
  schema_version: number;
  n_books: number;
  n_records: number;
  expectations_locked: boolean;
  expectations_registered: boolean;
  expectations_post_hoc: boolean;
  mask: { excluded: string[] };
  n_events: number;
  dimensions: DimensionInfo[];
}

export interface EffectRow {
  dimension_id: string;
  r: number | null;
  ci_lo: number | null;
  ci_hi: number | null;
  n_level: Record<string, number>;
  flag: string;
  expected_sign: number | null;
  band_lo: number | null;
  band_hi: number | null;
}

export interface EffectsPayload {
  expectations_post_hoc: boolean;
  effects: EffectRow[];
}

export interface UploadedBook {
  book_id: string;
  title: string;
  author: string;
  rating: number;
  hypothetical: boolean;
  media_type: string;
}

export interface RatingsResponse {
  added: number;
  total: number;
  books: UploadedBook[];
}

export interface AnnotateReport {
  total: number;
  annotated: number;
  skipped_cached: number;
  failures: Record<string, string>;
  coverage: Record<string, number>;
  retries: number;
}

export interface ExpectationEntry {
  sign: -1 | 0 | 1;
  band?: [number, number] | null;
}

export interface ExpectationsResponse {
  registered: number;
  post_hoc: boolean;
  locked: boolean;
}

export interface ConcordancePayload {
  percent: number;
  matches: number;
  compared: number;
  verdicts: Record<string, string>;
  expectations_post_hoc: boolean;
}

export interface ExplanationTerm {
  dimension_id: string;
  contribution: number;
}

export interface RecommendationRow {
  book_id: string;
  title: string;
  predicted_percentile: number;
  rank: number;
  explanation: ExplanationTerm[];
  mode: "enjoyment" | "exploration";
  informativeness: number | null;
}

export interface RecommendationPayload {
  mode: "enjoyment" | "exploration";
  recommendations: RecommendationRow[];
  model: {
    ranked_by: string;
    explained_by: string;
    loocv_pearson: Record<string, number | null>;
    excluded_dimensions: string[];
  };
}

export interface DimensionBooksPayload {
  dimension_id: string;
  books: {
    book_id: string;
    title: string;
    author: string;
    value: number;
    percentile: number | null;
  }[];
}

export interface ApiError {
  error: string;
  detail: string;
}
