/**
 * HTTP service implementing the remote embedding wire contract:
 *
 *   POST /embed {"texts": [string, ...]}
 *     -> {"dim": n, "vectors": [[number, ...], ...]}
 *   GET /health -> {"status": "ok", "dim": n, "mode": "test-mode" | <model id>}
 *
 * Batches above the configured maximum are rejected with 413; malformed
 * bodies with 400. Request handling is stateless, so concurrent clients
 * are safe.
 */

import express, { Express, NextFunction, Request, Response } from "express";

import { EmptyContentError, hashEmbed } from "./hashing.js";

export interface SidecarConfig {
  /** "test-mode" or a sentence-embedding model identifier. */
  model: string;
  maxBatch: number;
  dim: number;
}

export type EmbedFn = (texts: string[]) => Promise<number[][]>;

export class ModelLoadFailure extends Error {
  readonly code = "ModelLoadFailure";
}

function testModeEmbedder(dim: number): EmbedFn {
  return async (texts: string[]) =>
    texts.map((t) => Array.from(hashEmbed(t, dim)));
}

/**
 * Resolve the embedding provider at startup. Test mode is built in; a model
 * identifier requires a sentence-embedding runtime to be importable.
 */
export async function loadEmbedder(config: SidecarConfig): Promise<EmbedFn> {
  if (config.model === "test-mode") {
    return testModeEmbedder(config.dim);
  }
  let pipelineFactory: (task: string, model: string) => Promise<unknown>;
  try {
    const transformers = await import("@xenova/transformers" as string);
    pipelineFactory = (transformers as { pipeline: typeof pipelineFactory }).pipeline;
  } catch (err) {
    throw new ModelLoadFailure(
      `cannot load model ${config.model}: no embedding runtime available (${err})`
    );
  }
  const pipe = (await pipelineFactory("feature-extraction", config.model)) as (
    texts: string[],
    opts: Record<string, unknown>
  ) => Promise<{ tolist(): number[][] }>;
  return async (texts: string[]) => {
    const out = await pipe(texts, { pooling: "mean", normalize: true });
    const vectors = out.tolist();
    for (const vec of vectors) {
      if (vec.length !== config.dim) {
        throw new ModelLoadFailure(
          `model emits dim ${vec.length}, declared ${config.dim}`
        );
      }
    }
    return vectors;
  };
}

function errorBody(code: string, message: string) {
  return { error: { code, message } };
}

export function createApp(config: SidecarConfig, embedder: EmbedFn): Express {
  const app = express();
  app.use(express.json({ limit: "16mb" }));

  // Malformed JSON from express.json lands here.
  app.use((err: Error, _req: Request, res: Response, next: NextFunction) => {
    if (err.name === "SyntaxError" || "body" in err) {
      res.status(400).json(errorBody("ParseError", "body is not valid JSON"));
      return;
    }
    next(err);
  });

  app.get("/health", (_req, res) => {
    res.json({
      status: "ok",
      dim: config.dim,
      mode: config.model === "test-mode" ? "test-mode" : config.model,
    });
  });

  app.post("/embed", (req, res) => {
    const body = req.body as unknown;
    if (
      typeof body !== "object" ||
      body === null ||
      !Array.isArray((body as { texts?: unknown }).texts)
    ) {
      res
        .status(400)
        .json(errorBody("ParseError", 'body must be {"texts": [string, ...]}'));
      return;
    }
    const texts = (body as { texts: unknown[] }).texts;
    if (!texts.every((t) => typeof t === "string")) {
      res.status(400).json(errorBody("ParseError", "texts must all be strings"));
      return;
    }
    if (texts.length > config.maxBatch) {
      res
        .status(413)
        .json(
          errorBody(
            "BatchTooLarge",
            `batch of ${texts.length} exceeds maximum ${config.maxBatch}`
          )
        );
      return;
    }
    embedder(texts as string[])
      .then((vectors) => {
        res.json({ dim: config.dim, vectors });
      })
      .catch((err) => {
        if (err instanceof EmptyContentError) {
          res.status(400).json(errorBody(err.code, err.message));
        } else {
          res.status(500).json(errorBody("Internal", String(err)));
        }
      });
  });

  return app;
}
