/**
 * HTTP services implementing the engine's wire contracts:
 *
 *   POST /generate {prompt, beam_size, length_penalty, max_new_tokens}
 *                  -> {text, model_tag, decode}
 *   POST /score    {query, document} -> {score}
 *
 * Malformed bodies get a 400 with a message; an unanswerable generation
 * request (a prompt the model cannot continue) gets a 422. Requests are
 * handled sequentially per process; run replicas for parallelism.
 */

import express, { Express } from "express";
import { z } from "zod";

import { generateFromPrompt } from "./generation.js";
import { relevanceScore } from "./relevance.js";

export const MODEL_TAG = "prompt-bigram-beam-v1";

const generateSchema = z.object({
  prompt: z.string().min(1),
  beam_size: z.number().int().min(1).default(4),
  length_penalty: z.number().finite().default(1.0),
  max_new_tokens: z.number().int().min(1).default(256),
});

const scoreSchema = z.object({
  query: z.string(),
  document: z.string(),
});

export function createApp(modelTag: string = MODEL_TAG): Express {
  const app = express();
  app.use(express.json({ limit: "4mb" }));

  app.get("/health", (_req, res) => {
    res.json({ status: "ok", model_tag: modelTag });
  });

  app.post("/generate", (req, res) => {
    const parsed = generateSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.issues.map((i) => i.message).join("; ") });
      return;
    }
    const { prompt, beam_size, length_penalty, max_new_tokens } = parsed.data;
    let text: string;
    try {
      text = generateFromPrompt(prompt, {
        beamSize: beam_size,
        lengthPenalty: length_penalty,
        maxNewTokens: max_new_tokens,
      });
    } catch (err) {
      res.status(422).json({ error: (err as Error).message });
      return;
    }
    if (!text) {
      res.status(422).json({ error: "model produced no continuation for this prompt" });
      return;
    }
    res.json({
      text,
      model_tag: modelTag,
      // effective decoding parameters, echoed for conformance checking
      decode: { beam_size, length_penalty, max_new_tokens },
    });
  });

  app.post("/score", (req, res) => {
    const parsed = scoreSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.issues.map((i) => i.message).join("; ") });
      return;
    }
    res.json({ score: relevanceScore(parsed.data.query, parsed.data.document) });
  });

  return app;
}

export interface RunningServer {
  port: number;
  close: () => Promise<void>;
}

export function startServer(app: Express, port: number, host = "127.0.0.1"): Promise<RunningServer> {
  return new Promise((resolve, reject) => {
    const server = app.listen(port, host, () => {
      const address = server.address();
      if (address === null || typeof address === "string") {
        reject(new Error("could not determine bound port"));
        return;
      }
      resolve({
        port: address.port,
        close: () =>
          new Promise<void>((done, fail) =>
            server.close((err) => (err ? fail(err) : done())),
          ),
      });
    });
    server.on("error", reject);
  });
}
