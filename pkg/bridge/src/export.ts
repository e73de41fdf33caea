/**
 * Corpus export: encode every QA pair and write the engine's sentence and
 * token store files plus a JSON manifest describing exactly how the
 * embeddings were produced.
 */

import { createHash } from "node:crypto";
import { readFileSync, writeFileSync, mkdirSync } from "node:fs";
import { join } from "node:path";

import {
  SentenceRecord,
  TokenRecord,
  encodeSentenceStore,
  encodeTokenStore,
} from "./codec.js";
import {
  DEFAULT_ENCODER,
  ENCODER_NAME,
  ENCODER_REVISION,
  EncoderConfig,
  encodeTokens,
  meanPool,
} from "./encoder.js";

export type TextUnit = "question_answer" | "question";

export interface ExportOptions {
  corpusPath: string;
  outDir: string;
  encoder?: Partial<EncoderConfig>;
  textUnit?: TextUnit;
}

export interface ExportManifest {
  encoder: string;
  encoder_revision: string;
  pooling: "mean";
  layer: "none";
  include_special_tokens: false;
  dim: number;
  seed: number;
  max_tokens: number;
  text_unit: TextUnit;
  count: number;
  truncated_records: number;
  sentence_store: string;
  sentence_sha256: string;
  token_store: string;
  token_sha256: string;
}

interface QaPair {
  id: string;
  question: string;
  answer: string;
}

export function readCorpus(path: string): QaPair[] {
  const pairs: QaPair[] = [];
  const seen = new Set<string>();
  const lines = readFileSync(path, "utf-8").split("\n");
  lines.forEach((line, index) => {
    if (!line.trim()) return;
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch {
      throw new Error(`line ${index + 1}: invalid JSON`);
    }
    const rec = raw as Record<string, unknown>;
    for (const key of ["id", "question", "answer"]) {
      if (typeof rec[key] !== "string" || !(rec[key] as string).trim()) {
        throw new Error(`line ${index + 1}: missing or empty ${key}`);
      }
    }
    const id = rec.id as string;
    if (seen.has(id)) throw new Error(`line ${index + 1}: duplicate id ${id}`);
    seen.add(id);
    pairs.push({ id, question: rec.question as string, answer: rec.answer as string });
  });
  if (pairs.length === 0) throw new Error("corpus has no records");
  return pairs;
}

function sha256(buf: Buffer): string {
  return createHash("sha256").update(buf).digest("hex");
}

export function exportCorpus(options: ExportOptions): ExportManifest {
  const config: EncoderConfig = { ...DEFAULT_ENCODER, ...options.encoder };
  const textUnit: TextUnit = options.textUnit ?? "question_answer";
  const pairs = readCorpus(options.corpusPath);

  const sentences: SentenceRecord[] = [];
  const tokenRecords: TokenRecord[] = [];
  let truncated = 0;
  for (const pair of pairs) {
    const text =
      textUnit === "question" ? pair.question : `${pair.question} ${pair.answer}`;
    const enc = encodeTokens(text, config);
    if (enc.truncated) truncated += 1;
    tokenRecords.push({ id: pair.id, values: enc.values, tokens: enc.tokens });
    sentences.push({ id: pair.id, vector: meanPool(enc.values, enc.tokens, config.dim) });
  }

  mkdirSync(options.outDir, { recursive: true });
  const sentencePath = join(options.outDir, "corpus.rbqe");
  const tokenPath = join(options.outDir, "corpus.rbqt");
  const sentenceBuf = encodeSentenceStore(sentences);
  const tokenBuf = encodeTokenStore(tokenRecords, config.dim);
  writeFileSync(sentencePath, sentenceBuf);
  writeFileSync(tokenPath, tokenBuf);

  const manifest: ExportManifest = {
    encoder: ENCODER_NAME,
    encoder_revision: ENCODER_REVISION,
    pooling: "mean",
    layer: "none",
    include_special_tokens: false,
    dim: config.dim,
    seed: config.seed,
    max_tokens: config.maxTokens,
    text_unit: textUnit,
    count: pairs.length,
    truncated_records: truncated,
    sentence_store: sentencePath,
    sentence_sha256: sha256(sentenceBuf),
    token_store: tokenPath,
    token_sha256: sha256(tokenBuf),
  };
  writeFileSync(join(options.outDir, "manifest.json"), JSON.stringify(manifest, null, 2) + "\n");
  return manifest;
}
