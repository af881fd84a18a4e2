// Demo entry point: one server hosting the fixture API and the built UI, so
// the whole wizard runs with no model backend at all.

import { createServer } from "node:http";
import { readFile } from "node:fs/promises";
import { dirname, extname, join, normalize } from "node:path";
import { fileURLToPath } from "node:url";
import { FixtureServer } from "./fixtureServer.js";

const distDir = dirname(fileURLToPath(import.meta.url));
const rootDir = join(distDir, "..");

const MIME: Record<string, string> = {
  ".html": "text/html; charset=utf-8",
  ".js": "text/javascript; charset=utf-8",
  ".css": "text/css; charset=utf-8",
  ".svg": "image/svg+xml",
};

const api = new FixtureServer();

const server = createServer((req, res) => {
  void (async () => {
    if (await api.handle(req, res)) return;
    const path = req.url === "/" || req.url === undefined ? "/index.html" : req.url;
    const file = normalize(join(rootDir, path));
    if (!file.startsWith(rootDir)) {
      res.writeHead(403).end();
      return;
    }
    try {
      const body = await readFile(file);
      res.writeHead(200, {
        "Content-Type": MIME[extname(file)] ?? "application/octet-stream",
      });
      res.end(body);
    } catch {
      res.writeHead(404).end("not found");
    }
  })();
});

const port = Number(process.env.PORT ?? 8123);
server.listen(port, "127.0.0.1", () => {
  console.log(`demo wizard on http://127.0.0.1:${port} (fixture data, no backend)`);
});
