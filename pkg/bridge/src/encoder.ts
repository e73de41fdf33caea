/**
 * Deterministic token encoder: each whitespace token maps to a unit-norm
 * float32 vector derived from a SHA-256 hash of (seed, token), and the
 * sentence vector is the float64 mean of the stored float32 token rows —
 * the same pooling rule the engine applies, so round trips agree.
 *
 * This is a model-free stand-in for a transformer encoder; the export
 * manifest records it by name so experiments stay comparable.
 */

import { createHash } from "node:crypto";

export const ENCODER_NAME = "hash-unit";
export const ENCODER_REVISION = "1";

export interface EncoderConfig {
  dim: number;
  seed: number;
  /** Texts longer than this many whitespace tokens are truncated. */
  maxTokens: number;
}

export const DEFAULT_ENCODER: EncoderConfig = { dim: 768, seed: 0, maxTokens: 512 };

export function tokenizeWhitespace(text: string): string[] {
  return text.split(/\s+/u).filter((t) => t.length > 0);
}

/** Unit-norm float32 vector, a pure function of (token, seed, dim). */
export function tokenVector(token: string, dim: number, seed: number): Float32Array {
  if (dim < 2) throw new Error("encoder needs dim >= 2");
  const base = createHash("sha256").update(`${seed}${token}`).digest();
  const raw = new Float64Array(dim);
  let block = Buffer.alloc(0);
  let blockIndex = 0;
  let used = 32; // force the first refill
  for (let i = 0; i < dim; i++) {
    if (used + 4 > 32) {
      // counter-mode expansion of the base digest
      block = createHash("sha256").update(base).update(String(blockIndex)).digest();
      blockIndex += 1;
      used = 0;
    }
    const u = block.readUInt32LE(used);
    used += 4;
    raw[i] = (u / 0xffffffff) * 2 - 1; // uniform in [-1, 1]
  }
  let norm = 0;
  for (const v of raw) norm += v * v;
  norm = Math.sqrt(norm);
  if (norm === 0) {
    raw[0] = 1;
    norm = 1;
  }
  const out = new Float32Array(dim);
  for (let i = 0; i < dim; i++) out[i] = Math.fround(raw[i] / norm);
  return out;
}

export interface TokenEncoding {
  /** Row-major (tokens × dim) float32 values. */
  values: Float32Array;
  tokens: number;
  truncated: boolean;
}

export function encodeTokens(text: string, config: EncoderConfig): TokenEncoding {
  let tokens = tokenizeWhitespace(text);
  const truncated = tokens.length > config.maxTokens;
  if (truncated) tokens = tokens.slice(0, config.maxTokens);
  if (tokens.length === 0) throw new Error("cannot encode empty text");
  const values = new Float32Array(tokens.length * config.dim);
  tokens.forEach((tok, row) => {
    values.set(tokenVector(tok, config.dim, config.seed), row * config.dim);
  });
  return { values, tokens: tokens.length, truncated };
}

/** Float64 mean over float32 rows, emitted as float32. */
export function meanPool(values: Float32Array, tokens: number, dim: number): Float32Array {
  if (tokens < 1 || values.length !== tokens * dim) {
    throw new Error(`bad pooling shape: ${values.length} values for ${tokens} x ${dim}`);
  }
  const acc = new Float64Array(dim);
  for (let row = 0; row < tokens; row++) {
    for (let j = 0; j < dim; j++) {
      acc[j] += values[row * dim + j];
    }
  }
  const out = new Float32Array(dim);
  for (let j = 0; j < dim; j++) out[j] = Math.fround(acc[j] / tokens);
  return out;
}

export function encodeSentence(text: string, config: EncoderConfig): Float32Array {
  const enc = encodeTokens(text, config);
  return meanPool(enc.values, enc.tokens, config.dim);
}
