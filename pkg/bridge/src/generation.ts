/**
 * Deterministic answer generation: true beam search with length
 * normalization over a language model interface.
 *
 * The bundled model conditions on the request prompt itself — a bigram
 * table built from the prompt's tokens, continuing from its final token
 * (the trailing "Answer:" marker in the engine's prompt format). No
 * checkpoints are downloadable in this environment, so this keeps the
 * decoding contract (beam_size, length_penalty, max_new_tokens) honest
 * and observable while remaining fully deterministic; a real model server
 * can replace this process without any engine-side change.
 */

export const END = ""; // end-of-sequence marker, never a real token

export interface LanguageModel {
  /** Token the decode starts from. */
  start(): string;
  /** Possible next tokens with natural-log probabilities. */
  continuations(prev: string): Map<string, number>;
}

export interface DecodeOptions {
  beamSize: number;
  lengthPenalty: number;
  maxNewTokens: number;
}

interface Hypothesis {
  tokens: string[];
  logProb: number;
}

function normalizedScore(h: Hypothesis, lengthPenalty: number): number {
  const length = Math.max(h.tokens.length, 1);
  return h.logProb / Math.pow(length, lengthPenalty);
}

function byScoreThenText(lengthPenalty: number) {
  return (a: Hypothesis, b: Hypothesis): number => {
    const sa = normalizedScore(a, lengthPenalty);
    const sb = normalizedScore(b, lengthPenalty);
    if (sa !== sb) return sb - sa;
    return a.tokens.join(" ") < b.tokens.join(" ") ? -1 : 1;
  };
}

/** Beam-search decode; returns the best hypothesis token sequence. */
export function beamSearch(model: LanguageModel, options: DecodeOptions): string[] {
  if (options.beamSize < 1) throw new Error("beam size must be >= 1");
  if (options.maxNewTokens < 1) throw new Error("max new tokens must be >= 1");
  const compare = byScoreThenText(options.lengthPenalty);
  let active: { last: string; hyp: Hypothesis }[] = [
    { last: model.start(), hyp: { tokens: [], logProb: 0 } },
  ];
  const completed: Hypothesis[] = [];

  for (let step = 0; step < options.maxNewTokens && active.length > 0; step++) {
    const expansions: { last: string; hyp: Hypothesis }[] = [];
    for (const beam of active) {
      const nexts = model.continuations(beam.last);
      if (nexts.size === 0) {
        completed.push(beam.hyp);
        continue;
      }
      for (const [token, logProb] of nexts) {
        const hyp = {
          tokens: token === END ? beam.hyp.tokens : [...beam.hyp.tokens, token],
          logProb: beam.hyp.logProb + logProb,
        };
        if (token === END) {
          completed.push(hyp);
        } else {
          expansions.push({ last: token, hyp });
        }
      }
    }
    // keep the beam_size best partial hypotheses by cumulative log-probability
    expansions.sort((a, b) =>
      a.hyp.logProb !== b.hyp.logProb
        ? b.hyp.logProb - a.hyp.logProb
        : a.hyp.tokens.join(" ") < b.hyp.tokens.join(" ")
          ? -1
          : 1,
    );
    active = expansions.slice(0, options.beamSize);
  }
  completed.push(...active.map((beam) => beam.hyp));
  const nonEmpty = completed.filter((h) => h.tokens.length > 0);
  const pool = nonEmpty.length > 0 ? nonEmpty : completed;
  if (pool.length === 0) return [];
  pool.sort(compare);
  return pool[0].tokens;
}

/** Bigram model over the prompt's whitespace tokens. */
export class PromptBigramModel implements LanguageModel {
  private table = new Map<string, Map<string, number>>();
  private startToken: string;

  constructor(prompt: string) {
    const tokens = prompt.split(/\s+/u).filter((t) => t.length > 0);
    if (tokens.length === 0) throw new Error("prompt has no tokens");
    const counts = new Map<string, Map<string, number>>();
    const bump = (prev: string, next: string) => {
      let row = counts.get(prev);
      if (!row) {
        row = new Map();
        counts.set(prev, row);
      }
      row.set(next, (row.get(next) ?? 0) + 1);
    };
    for (let i = 0; i + 1 < tokens.length; i++) bump(tokens[i], tokens[i + 1]);
    bump(tokens[tokens.length - 1], END);
    for (const [prev, row] of counts) {
      let total = 0;
      for (const c of row.values()) total += c;
      const probs = new Map<string, number>();
      for (const [next, c] of row) probs.set(next, Math.log(c / total));
      this.table.set(prev, probs);
    }
    this.startToken = tokens[tokens.length - 1];
  }

  start(): string {
    return this.startToken;
  }

  continuations(prev: string): Map<string, number> {
    return this.table.get(prev) ?? new Map();
  }
}

export function generateFromPrompt(prompt: string, options: DecodeOptions): string {
  const tokens = beamSearch(new PromptBigramModel(prompt), options);
  return tokens.join(" ");
}
