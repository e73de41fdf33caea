"""From-scratch generation metrics: unigram BLEU, unigram ROUGE recall,
embedding-precision score, and chunk-penalized harmonic-mean score.

All scoring functions are pure and deterministic. Token inputs are plain
string sequences produced by `tokenize` (or any compatible tokenizer).
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class TokenizedText:
    original: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class MeteorParams:
    gamma: float = 0.5  # chunk penalty weight
    theta: float = 3.0  # chunk penalty exponent

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.theta <= 0:
            raise ValueError(f"theta must be positive, got {self.theta}")


@dataclass(frozen=True)
class MetricRow:
    id: str
    bleu1: float
    rouge1: float
    bertscore_p: float
    meteor: float
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class MetricSummary:
    bleu1: float
    rouge1: float
    bertscore_p: float
    meteor: float
    example_count: int
    degenerate_count: int
    bertscore_count: int


def _is_separator(ch: str) -> bool:
    return ch.isspace() or unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> TokenizedText:
    """Lowercase and split on whitespace/punctuation; punctuation is dropped."""
    tokens: list[str] = []
    current: list[str] = []
    for ch in text.lower():
        if _is_separator(ch):
            if current:
                tokens.append("".join(current))
                current = []
        else:
            current.append(ch)
    if current:
        tokens.append("".join(current))
    return TokenizedText(original=text, tokens=tuple(tokens))


def bleu1(generated: Sequence[str], reference: Sequence[str]) -> float:
    """Unigram BLEU: clipped precision times the brevity penalty.

    Candidate counts are clipped by reference counts; a candidate shorter
    than the reference is penalized by exp(1 - r/c). Zero precision or an
    empty candidate scores 0.
    """
    if not reference:
        raise ValueError("reference must be non-empty")
    if not generated:
        return 0.0
    gen_counts = Counter(generated)
    ref_counts = Counter(reference)
    clipped = sum(min(count, ref_counts[word]) for word, count in gen_counts.items())
    p1 = clipped / len(generated)
    if p1 == 0.0:
        return 0.0
    c, r = len(generated), len(reference)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * p1


def rouge1_recall(generated: Sequence[str], reference: Sequence[str]) -> float:
    """Unigram recall: clipped co-occurrence over the reference length."""
    if not reference:
        raise ValueError("reference must be non-empty")
    gen_counts = Counter(generated)
    ref_counts = Counter(reference)
    overlap = sum(min(count, gen_counts[word]) for word, count in ref_counts.items())
    return overlap / len(reference)


def bertscore_precision(gen_embs: np.ndarray, ref_embs: np.ndarray) -> float:
    """Mean over generated-token embeddings of the max cosine similarity
    against all reference-token embeddings."""
    x = np.asarray(gen_embs, dtype=np.float64)
    y = np.asarray(ref_embs, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("both embedding matrices must be non-empty and 2-D")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    x_norms = np.linalg.norm(x, axis=1)
    y_norms = np.linalg.norm(y, axis=1)
    if np.any(x_norms == 0.0) or np.any(y_norms == 0.0):
        raise ValueError("zero-norm token embedding")
    sim = (x / x_norms[:, None]) @ (y / y_norms[:, None]).T
    sim = np.clip(sim, -1.0, 1.0)
    return float(sim.max(axis=1).mean())


def align_unigrams(
    generated: Sequence[str],
    reference: Sequence[str],
    stemmer: Callable[[str], str] | None = None,
) -> tuple[list[tuple[int, int]], int, int]:
    """Exact one-to-one unigram alignment and its chunk count.

    Each candidate token, scanned left to right, is paired with the first
    unused reference occurrence of the same (optionally stemmed) token, so
    the match count equals the clipped-count maximum. Chunks are maximal
    runs of pairs contiguous in both sequences.

    Returns (pairs, match_count, chunk_count).
    """
    gen = [stemmer(t) for t in generated] if stemmer else list(generated)
    ref = [stemmer(t) for t in reference] if stemmer else list(reference)
    positions: dict[str, list[int]] = {}
    for j, word in enumerate(ref):
        positions.setdefault(word, []).append(j)
    next_unused = {word: 0 for word in positions}
    pairs: list[tuple[int, int]] = []
    for i, word in enumerate(gen):
        slots = positions.get(word)
        if slots is None or next_unused[word] >= len(slots):
            continue
        pairs.append((i, slots[next_unused[word]]))
        next_unused[word] += 1
    chunks = 0
    prev = None
    for i, j in pairs:
        if prev is None or (i, j) != (prev[0] + 1, prev[1] + 1):
            chunks += 1
        prev = (i, j)
    return pairs, len(pairs), chunks


def meteor_from_counts(m: int, w_gen: int, w_ref: int, chunks: int, params: MeteorParams) -> float:
    """Score from alignment counts: recall-weighted harmonic mean times the
    complement of the fragmentation penalty gamma*(ch/m)^theta."""
    if m == 0:
        return 0.0
    precision = m / w_gen
    recall = m / w_ref
    f_mean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = params.gamma * (chunks / m) ** params.theta
    return f_mean * (1.0 - penalty)


def meteor(
    generated: Sequence[str],
    reference: Sequence[str],
    params: MeteorParams = MeteorParams(),
    stemmer: Callable[[str], str] | None = None,
) -> float:
    if not reference:
        raise ValueError("reference must be non-empty")
    if not generated:
        return 0.0
    _, m, chunks = align_unigrams(generated, reference, stemmer)
    return meteor_from_counts(m, len(generated), len(reference), chunks, params)


def strip_affixes(token: str) -> str:
    """Crude English suffix stripper, optional stand-in for a stemmer."""
    for suffix in ("ing", "edly", "ed", "es", "ly", "s"):
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            return token[: -len(suffix)]
    return token


def evaluate_pair(
    generated: str,
    reference: str,
    token_embedder: Callable[[str], np.ndarray],
    example_id: str = "",
    meteor_params: MeteorParams = MeteorParams(),
) -> MetricRow:
    """Score one generated/reference pair on all four metrics.

    The embedding-based score uses token matrices from `token_embedder`
    (real encoder or stub). An empty candidate yields a degenerate row with
    the embedding score error-flagged rather than raising.
    """
    gen_tokens = tokenize(generated).tokens
    ref_tokens = tokenize(reference).tokens
    if not ref_tokens:
        raise ValueError("reference has no tokens")
    flags: list[str] = []
    if not gen_tokens:
        flags.append("degenerate")
    b = bleu1(gen_tokens, ref_tokens) if gen_tokens else 0.0
    r = rouge1_recall(gen_tokens, ref_tokens)
    mt = meteor(gen_tokens, ref_tokens, meteor_params)
    try:
        bert = bertscore_precision(token_embedder(generated), token_embedder(reference))
    except ValueError:
        bert = 0.0
        flags.append("bertscore_error")
    return MetricRow(
        id=example_id,
        bleu1=b,
        rouge1=r,
        bertscore_p=bert,
        meteor=mt,
        flags=tuple(flags),
    )


def aggregate(rows: Sequence[MetricRow]) -> MetricSummary:
    """Macro-average the per-example rows.

    Degenerate rows count toward every mean except the embedding score,
    which skips rows whose embedding computation was error-flagged.
    """
    if not rows:
        raise ValueError("cannot aggregate zero rows")
    bert_rows = [row for row in rows if "bertscore_error" not in row.flags]
    return MetricSummary(
        bleu1=sum(r.bleu1 for r in rows) / len(rows),
        rouge1=sum(r.rouge1 for r in rows) / len(rows),
        bertscore_p=(sum(r.bertscore_p for r in bert_rows) / len(bert_rows)) if bert_rows else 0.0,
        meteor=sum(r.meteor for r in rows) / len(rows),
        example_count=len(rows),
        degenerate_count=sum(1 for r in rows if "degenerate" in r.flags),
        bertscore_count=len(bert_rows),
    )
