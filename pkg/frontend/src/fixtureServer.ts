// In-process fixture implementation of the backend API, used by the tests
// and the demo so the whole wizard is operable with no live model backend.
// It mimics the documented semantics: the pre-registration lock, post-hoc
// labeling, mask-aware recommendation metadata, and flagged rating uploads.

import { createServer, type IncomingMessage, type Server, type ServerResponse } from "node:http";
import { FIXTURE_DIMENSIONS, FIXTURE_EFFECTS, FIXTURE_RECOMMENDATIONS } from "./fixtures.js";
import type { UploadedBook } from "./types.js";

interface FixtureState {
  books: UploadedBook[];
  annotated: Set<string>;
  locked: boolean;
  expectationsRegistered: boolean;
  postHoc: boolean;
  maskExcluded: string[];
  events: number;
  idempotency: Map<string, unknown>;
}

function freshState(): FixtureState {
  return {
    books: [],
    annotated: new Set(),
    locked: false,
    expectationsRegistered: false,
    postHoc: false,
    maskExcluded: [],
    events: 0,
    idempotency: new Map(),
  };
}

function bookId(title: string, author: string): string {
  let hash = 0;
  for (const ch of `${title.toLowerCase()}|${author.toLowerCase()}`) {
    hash = (hash * 31 + ch.charCodeAt(0)) >>> 0;
  }
  return `fx-${hash.toString(16).padStart(8, "0")}`;
}

function parseCsv(csv: string): Record<string, string>[] {
  const lines = csv.trim().split(/\r?\n/);
  if (lines.length < 1) return [];
  const header = lines[0].split(",").map((h) => h.trim());
  return lines.slice(1).filter((l) => l.trim()).map((line) => {
    const cells = line.split(",");
    const row: Record<string, string> = {};
    header.forEach((name, i) => { row[name] = (cells[i] ?? "").trim(); });
    return row;
  });
}

function readBody(req: IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    req.on("data", (c) => chunks.push(c));
    req.on("end", () => resolve(Buffer.concat(chunks).toString("utf-8")));
    req.on("error", reject);
  });
}

function send(res: ServerResponse, status: number, payload: unknown): void {
  res.writeHead(status, { "Content-Type": "application/json" });
  res.end(JSON.stringify(payload));
}

export class FixtureServer {
  private state = freshState();
  private server: Server;

  constructor() {
    this.server = createServer((req, res) => {
      void this.handle(req, res).then((matched) => {
        if (!matched) send(res, 404, { error: "NotFound", detail: req.url ?? "/" });
      });
    });
  }

  /** Serve one request; returns false for non-API paths so callers can
      compose static hosting around the fixture API. */
  async handle(req: IncomingMessage, res: ServerResponse): Promise<boolean> {
    const url = new URL(req.url ?? "/", "http://fixture");
    if (!url.pathname.startsWith("/api")) return false;
    try {
      await this.route(req, res);
    } catch (err) {
      send(res, 500, { error: "InternalError", detail: String(err) });
    }
    return true;
  }

  listen(port = 0): Promise<number> {
    return new Promise((resolve) => {
      this.server.listen(port, "127.0.0.1", () => {
        const address = this.server.address();
        resolve(typeof address === "object" && address ? address.port : port);
      });
    });
  }

  close(): Promise<void> {
    return new Promise((resolve, reject) =>
      this.server.close((err) => (err ? reject(err) : resolve())));
  }

  reset(): void {
    this.state = freshState();
  }

  private project() {
    const s = this.state;
    return {
      schema_version: 1,
      n_books: s.books.length,
      n_records: s.annotated.size,
      expectations_locked: s.locked,
      expectations_registered: s.expectationsRegistered,
      expectations_post_hoc: s.postHoc,
      mask: { excluded: [...s.maskExcluded] },
      n_events: s.events,
      dimensions: FIXTURE_DIMENSIONS,
    };
  }

  private effectsPayload() {
    const excluded = new Set(this.state.maskExcluded);
    return {
      expectations_post_hoc: this.state.postHoc,
      effects: FIXTURE_EFFECTS.filter((row) => !excluded.has(row.dimension_id)),
    };
  }

  private recommendationPayload(mode: "enjoyment" | "exploration", k: number,
                                candidates: { title: string; author: string }[]) {
    const excluded = new Set(this.state.maskExcluded);
    const pool = candidates.length
      ? candidates.map((cand, i) => ({
          ...FIXTURE_RECOMMENDATIONS[i % FIXTURE_RECOMMENDATIONS.length],
          book_id: bookId(cand.title, cand.author),
          title: cand.title,
          rank: i + 1,
        }))
      : FIXTURE_RECOMMENDATIONS;
    const recs = pool.slice(0, k).map((rec, i) => ({
      ...rec,
      rank: i + 1,
      mode,
      informativeness: mode === "exploration" ? 0.9 - 0.1 * i : null,
      explanation: rec.explanation.filter((t) => !excluded.has(t.dimension_id)),
    }));
    // LOOCV metadata shifts when the mask changes, like the real model does.
    const penalty = 0.05 * this.state.maskExcluded.length;
    return {
      mode,
      recommendations: recs,
      model: {
        ranked_by: "ridge",
        explained_by: "ridge",
        loocv_pearson: {
          ridge: Number((0.64 - penalty).toFixed(3)),
          random_forest: Number((0.61 - penalty).toFixed(3)),
        },
        excluded_dimensions: [...this.state.maskExcluded].sort(),
      },
    };
  }

  private async route(req: IncomingMessage, res: ServerResponse): Promise<void> {
    const s = this.state;
    const url = new URL(req.url ?? "/", "http://fixture");
    const key = req.headers["idempotency-key"];
    const idem = typeof key === "string" ? key : undefined;
    if (idem && s.idempotency.has(idem)) {
      send(res, 200, s.idempotency.get(idem));
      return;
    }
    const remember = (payload: unknown) => {
      if (idem) s.idempotency.set(idem, payload);
      return payload;
    };

    if (req.method === "GET" && url.pathname === "/api/project") {
      send(res, 200, this.project());
      return;
    }

    if (req.method === "POST" && url.pathname === "/api/ratings") {
      const body = JSON.parse(await readBody(req));
      const rows: Record<string, unknown>[] = body.rows
        ?? parseCsv(body.csv ?? "");
      if (!rows.length) {
        send(res, 400, { error: "EmptyFile", detail: "no data rows" });
        return;
      }
      let added = 0;
      for (const row of rows) {
        const title = String(row["title"] ?? "");
        const author = String(row["author"] ?? "");
        if (!title || !author || row["rating"] === undefined || row["rating"] === "") {
          send(res, 400, { error: "FormatError", detail: "need title,author,rating" });
          return;
        }
        const id = bookId(title, author);
        if (s.books.some((b) => b.book_id === id)) continue;
        s.books.push({
          book_id: id,
          title,
          author,
          rating: Number(row["rating"]),
          hypothetical: row["hypothetical"] === true || row["hypothetical"] === "1",
          media_type: String(row["media_type"] || "book"),
        });
        added += 1;
      }
      s.events += 1;
      send(res, 200, remember({ added, total: s.books.length, books: s.books }));
      return;
    }

    if (req.method === "POST" && url.pathname === "/api/annotate") {
      if (!s.books.length) {
        send(res, 400, { error: "ValueError", detail: "no books to annotate" });
        return;
      }
      for (const book of s.books) s.annotated.add(book.book_id);
      s.events += 1;
      send(res, 200, remember({
        total: s.books.length,
        annotated: s.annotated.size,
        skipped_cached: 0,
        failures: {},
        coverage: { wikipedia: s.books.length, goodreads: s.books.length,
                    both: s.books.length, other_only: 0 },
        retries: 0,
      }));
      return;
    }

    if (req.method === "GET" && url.pathname === "/api/effects") {
      if (!s.annotated.size) {
        send(res, 409, { error: "NoData", detail: "no annotated books" });
        return;
      }
      s.locked = true; // viewing the effects locks plain registration
      s.events += 1;
      send(res, 200, this.effectsPayload());
      return;
    }

    if (req.method === "POST" && url.pathname === "/api/expectations") {
      const body = JSON.parse(await readBody(req));
      const postHoc = Boolean(body.post_hoc);
      const entries = Object.keys(body.expectations ?? {});
      const known = new Set(FIXTURE_DIMENSIONS.map((d) => d.id));
      const unknown = entries.filter((d) => !known.has(d));
      if (unknown.length) {
        send(res, 400, { error: "UnknownDimension", detail: unknown.join(",") });
        return;
      }
      if (s.locked && !postHoc) {
        send(res, 409, {
          error: "ExpectationsLocked",
          detail: "effects were already viewed; pass the post-hoc flag to store anyway",
        });
        return;
      }
      s.expectationsRegistered = true;
      s.postHoc = s.locked && postHoc;
      s.events += 1;
      send(res, 200, remember({
        registered: entries.length, post_hoc: s.postHoc, locked: s.locked,
      }));
      return;
    }

    if (req.method === "GET" && url.pathname === "/api/concordance") {
      if (!s.expectationsRegistered) {
        send(res, 409, { error: "NoExpectations", detail: "register first" });
        return;
      }
      send(res, 200, {
        percent: 75, matches: 3, compared: 4,
        verdicts: {
          mention_addictive: "match", mood_dark: "match",
          theme_war: "mismatch", theme_academia: "mismatch",
        },
        expectations_post_hoc: s.postHoc,
      });
      return;
    }

    if (req.method === "POST" && url.pathname === "/api/mask") {
      const body = JSON.parse(await readBody(req));
      const known = new Set(FIXTURE_DIMENSIONS.map((d) => d.id));
      const unknown = (body.excluded ?? []).filter((d: string) => !known.has(d));
      if (unknown.length) {
        send(res, 400, { error: "KeyError", detail: unknown.join(",") });
        return;
      }
      s.maskExcluded = [...(body.excluded ?? [])];
      s.events += 1;
      send(res, 200, remember({
        mask: { excluded: [...s.maskExcluded].sort(), created_at: "", reasons: {} },
      }));
      return;
    }

    if (req.method === "POST" &&
        (url.pathname === "/api/recommend" || url.pathname === "/api/explore")) {
      if (!s.annotated.size) {
        send(res, 409, { error: "NoModel", detail: "no annotated books" });
        return;
      }
      const body = JSON.parse(await readBody(req));
      const candidates = (body.candidates
        ?? parseCsv(body.candidates_csv ?? "")) as { title: string; author: string }[];
      const duplicate = candidates.find((cand) =>
        s.books.some((b) => b.book_id === bookId(cand.title, cand.author)));
      if (duplicate) {
        send(res, 409, { error: "AlreadyRated", detail: duplicate.title });
        return;
      }
      const mode = url.pathname === "/api/recommend" ? "enjoyment" : "exploration";
      s.events += 1;
      send(res, 200, remember(this.recommendationPayload(
        mode, Number(body.k ?? 5), candidates)));
      return;
    }

    if (req.method === "GET" && url.pathname === "/api/dimension-books") {
      const dim = url.searchParams.get("dimension_id") ?? "";
      if (!FIXTURE_DIMENSIONS.some((d) => d.id === dim)) {
        send(res, 400, { error: "UnknownDimension", detail: dim });
        return;
      }
      send(res, 200, {
        dimension_id: dim,
        books: s.books.slice(0, 5).map((b, i) => ({
          book_id: b.book_id, title: b.title, author: b.author,
          value: i % 2, percentile: Number((0.2 + 0.15 * i).toFixed(2)),
        })),
      });
      return;
    }

    send(res, 404, { error: "NotFound", detail: url.pathname });
  }
}
