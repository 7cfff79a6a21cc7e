import { readFileSync } from "node:fs";
import type { Server } from "node:http";
import { AddressInfo } from "node:net";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { createApp, loadEmbedder, ModelLoadFailure, SidecarConfig } from "../src/server.js";

const here = dirname(fileURLToPath(import.meta.url));
const fixture = JSON.parse(
  readFileSync(join(here, "fixtures", "embed_interop_fixture.json"), "utf-8")
) as { dim: number; cases: { text: string; vector: number[] }[] };

const config: SidecarConfig = { model: "test-mode", maxBatch: 16, dim: 64 };

let server: Server;
let base: string;

beforeAll(async () => {
  const app = createApp(config, await loadEmbedder(config));
  await new Promise<void>((resolve) => {
    server = app.listen(0, "127.0.0.1", () => resolve());
  });
  const addr = server.address() as AddressInfo;
  base = `http://127.0.0.1:${addr.port}`;
});

afterAll(() => {
  server.close();
});

async function post(path: string, body: unknown, raw = false) {
  return fetch(base + path, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: raw ? (body as string) : JSON.stringify(body),
  });
}

describe("GET /health", () => {
  it("reports status, dim, and mode", async () => {
    const resp = await fetch(base + "/health");
    expect(resp.status).toBe(200);
    expect(await resp.json()).toEqual({ status: "ok", dim: 64, mode: "test-mode" });
  });
});

describe("POST /embed", () => {
  it("conforms to the wire schema with unit-norm vectors", async () => {
    const resp = await post("/embed", { texts: ["graph retrieval", "manifold index"] });
    expect(resp.status).toBe(200);
    const body = (await resp.json()) as { dim: number; vectors: number[][] };
    expect(Object.keys(body).sort()).toEqual(["dim", "vectors"]);
    expect(body.dim).toBe(64);
    expect(body.vectors.length).toBe(2);
    for (const vec of body.vectors) {
      expect(vec.length).toBe(64);
      let ss = 0;
      for (const x of vec) {
        expect(Number.isFinite(x)).toBe(true);
        ss += x * x;
      }
      expect(Math.abs(Math.sqrt(ss) - 1.0)).toBeLessThan(1e-6);
    }
  });

  it("is bit-compatible with the builtin embedder over the wire", async () => {
    // Chunk the 50-text fixture under the batch limit.
    for (let start = 0; start < fixture.cases.length; start += config.maxBatch) {
      const chunk = fixture.cases.slice(start, start + config.maxBatch);
      const resp = await post("/embed", { texts: chunk.map((c) => c.text) });
      expect(resp.status).toBe(200);
      const body = (await resp.json()) as { vectors: number[][] };
      chunk.forEach((c, row) => {
        expect(body.vectors[row].length).toBe(c.vector.length);
        c.vector.forEach((want, i) => {
          expect(Object.is(body.vectors[row][i], want), `${c.text} [${i}]`).toBe(true);
        });
      });
    }
  });

  it("rejects oversize batches with 413", async () => {
    const texts = Array.from({ length: config.maxBatch + 1 }, (_, i) => `text ${i}`);
    const resp = await post("/embed", { texts });
    expect(resp.status).toBe(413);
    const body = (await resp.json()) as { error: { code: string } };
    expect(body.error.code).toBe("BatchTooLarge");
  });

  it("accepts a batch at exactly the limit", async () => {
    const texts = Array.from({ length: config.maxBatch }, (_, i) => `text ${i}`);
    const resp = await post("/embed", { texts });
    expect(resp.status).toBe(200);
  });

  it("rejects malformed JSON with 400", async () => {
    const resp = await post("/embed", "} not json {", true);
    expect(resp.status).toBe(400);
    const body = (await resp.json()) as { error: { code: string } };
    expect(body.error.code).toBe("ParseError");
  });

  it("rejects missing or non-string texts with 400", async () => {
    expect((await post("/embed", { wrong: [] })).status).toBe(400);
    expect((await post("/embed", { texts: [1, 2] })).status).toBe(400);
  });

  it("rejects empty text content with 400", async () => {
    const resp = await post("/embed", { texts: ["fine", "   "] });
    expect(resp.status).toBe(400);
    const body = (await resp.json()) as { error: { code: string } };
    expect(body.error.code).toBe("EmptyContent");
  });
});

describe("loadEmbedder", () => {
  it("fails at startup for an unavailable model", async () => {
    await expect(
      loadEmbedder({ model: "all-MiniLM-L6-v2", maxBatch: 8, dim: 384 })
    ).rejects.toThrow(ModelLoadFailure);
  });
});
