/**
 * Deterministic relevance scoring for the /score contract: unigram Dice
 * overlap between query and document, a probability-like value in [0, 1].
 */

const WORD = /[\p{L}\p{N}]+/gu;

export function wordTokens(text: string): string[] {
  return [...text.toLowerCase().matchAll(WORD)].map((m) => m[0]);
}

export function relevanceScore(query: string, document: string): number {
  const q = wordTokens(query);
  const d = wordTokens(document);
  if (q.length === 0 || d.length === 0) return 0;
  const counts = new Map<string, number>();
  for (const tok of d) counts.set(tok, (counts.get(tok) ?? 0) + 1);
  let overlap = 0;
  for (const tok of q) {
    const left = counts.get(tok) ?? 0;
    if (left > 0) {
      overlap += 1;
      counts.set(tok, left - 1);
    }
  }
  return (2 * overlap) / (q.length + d.length);
}
