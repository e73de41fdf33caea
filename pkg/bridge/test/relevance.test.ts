import { describe, expect, it } from "vitest";

import { relevanceScore, wordTokens } from "../src/relevance.js";

describe("relevance scoring", () => {
  it("tokenizes case-insensitively on word characters", () => {
    expect(wordTokens("What causes Sepsis?!")).toEqual(["what", "causes", "sepsis"]);
  });

  it("stays in [0, 1]", () => {
    const texts = ["", "a", "a b c", "sepsis sepsis fever", "x y z w"];
    for (const q of texts) {
      for (const d of texts) {
        const s = relevanceScore(q, d);
        expect(s).toBeGreaterThanOrEqual(0);
        expect(s).toBeLessThanOrEqual(1);
      }
    }
  });

  it("scores identical texts 1 and disjoint texts 0", () => {
    expect(relevanceScore("sepsis screening", "sepsis screening")).toBe(1);
    expect(relevanceScore("sepsis", "unrelated words")).toBe(0);
  });

  it("ranks an obviously relevant document above an irrelevant one", () => {
    const query = "what causes renal failure";
    const relevant = "renal failure is caused by loss of kidney function";
    const irrelevant = "the weather tomorrow will be sunny with light winds";
    expect(relevanceScore(query, relevant)).toBeGreaterThan(relevanceScore(query, irrelevant));
  });

  it("counts repeated terms at most per occurrence", () => {
    expect(relevanceScore("a a", "a b")).toBeCloseTo(0.5, 10);
  });
});
