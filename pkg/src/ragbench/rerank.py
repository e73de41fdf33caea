"""Four interchangeable strategies that reduce the dense top-k candidates to
the final n contexts.

Every strategy emits "larger is better" scores (the dense baseline negates
its distances) and breaks ties by ascending id, so downstream ordering is
deterministic across runs and platforms.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import QaPair
from .embeddings import TokenStore
from .metrics import tokenize


class RerankError(ValueError):
    """Raised when a strategy's inputs violate its contract."""


class Strategy(str, Enum):
    DENSE_L2 = "dense_l2"
    BM25 = "bm25"
    LATE_INTERACTION = "late_interaction"
    SEQ2SEQ_RELEVANCE = "seq2seq_relevance"


@dataclass(frozen=True)
class Candidate:
    qa: QaPair
    dense_distance: float  # squared L2 from the first stage

    def __post_init__(self) -> None:
        if self.dense_distance < 0:
            raise RerankError(f"negative dense distance for {self.qa.id}")


@dataclass(frozen=True)
class RankedContext:
    qa: QaPair
    score: float
    rank: int  # 1-based
    strategy: Strategy


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 <= 0:
            raise RerankError(f"k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise RerankError(f"b must be in [0, 1], got {self.b}")


@dataclass
class Bm25Stats:
    doc_tokens: dict[str, list[str]]
    doc_freq: dict[str, int]
    avgdl: float
    n_docs: int
    _term_freq: dict[str, dict[str, int]] = field(default_factory=dict, repr=False)

    def term_freq(self, doc_id: str) -> Mapping[str, int]:
        cached = self._term_freq.get(doc_id)
        if cached is None:
            cached = Counter(self.doc_tokens[doc_id])
            self._term_freq[doc_id] = cached
        return cached


def candidate_text(qa: QaPair) -> str:
    """Document text the re-rankers see: question and answer concatenated,
    mirroring how sentence embeddings are built."""
    return f"{qa.question} {qa.answer}"


def bm25_build(docs: Mapping[str, Sequence[str]]) -> Bm25Stats:
    """Collect document frequencies and length statistics for scoring."""
    if not docs:
        raise RerankError("cannot build BM25 stats over an empty corpus")
    doc_freq: dict[str, int] = {}
    total_len = 0
    for tokens in docs.values():
        total_len += len(tokens)
        for term in set(tokens):
            doc_freq[term] = doc_freq.get(term, 0) + 1
    avgdl = total_len / len(docs)
    if avgdl == 0.0:
        raise RerankError("all documents are empty; average length is zero")
    return Bm25Stats(
        doc_tokens={doc_id: list(tokens) for doc_id, tokens in docs.items()},
        doc_freq=doc_freq,
        avgdl=avgdl,
        n_docs=len(docs),
    )


def bm25_idf(stats: Bm25Stats, term: str) -> float:
    df = stats.doc_freq.get(term, 0)
    return math.log(1.0 + (stats.n_docs - df + 0.5) / (df + 0.5))


def bm25_score(
    stats: Bm25Stats,
    params: Bm25Params,
    query_tokens: Sequence[str],
    doc_id: str,
) -> float:
    """Okapi score of one document against the query.

    Summed over query tokens (a repeated query term contributes once per
    occurrence), with +1-smoothed IDF and length-normalized saturation.
    """
    if doc_id not in stats.doc_tokens:
        raise RerankError(f"unknown doc id {doc_id!r}")
    tf = stats.term_freq(doc_id)
    dl = len(stats.doc_tokens[doc_id])
    norm = params.k1 * (1.0 - params.b + params.b * dl / stats.avgdl)
    score = 0.0
    for term in query_tokens:
        freq = tf.get(term, 0)
        if freq == 0:
            continue
        score += bm25_idf(stats, term) * freq * (params.k1 + 1.0) / (freq + norm)
    return score


def maxsim_score(query_tokens: np.ndarray, doc_tokens: np.ndarray) -> float:
    """Late-interaction score: sum over query token embeddings of each one's
    maximum cosine similarity to any document token embedding."""
    q = np.asarray(query_tokens, dtype=np.float64)
    d = np.asarray(doc_tokens, dtype=np.float64)
    if q.ndim != 2 or d.ndim != 2 or q.shape[0] == 0 or d.shape[0] == 0:
        raise RerankError("token matrices must be non-empty and 2-D")
    if q.shape[1] != d.shape[1]:
        raise RerankError(f"dimension mismatch: {q.shape[1]} vs {d.shape[1]}")
    q_norms = np.linalg.norm(q, axis=1)
    d_norms = np.linalg.norm(d, axis=1)
    if np.any(q_norms == 0.0) or np.any(d_norms == 0.0):
        raise RerankError("zero-norm token embedding")
    sim = (q / q_norms[:, None]) @ (d / d_norms[:, None]).T
    sim = np.clip(sim, -1.0, 1.0)
    return float(sim.max(axis=1).sum())


def _take_top(scored: list[tuple[QaPair, float]], n: int, strategy: Strategy) -> list[RankedContext]:
    # descending score, ties by ascending id; n clamped to the pool size
    scored.sort(key=lambda item: (-item[1], item[0].id))
    top = scored[: max(n, 0)] if n < len(scored) else scored
    return [
        RankedContext(qa=qa, score=score, rank=i + 1, strategy=strategy)
        for i, (qa, score) in enumerate(top)
    ]


def rerank_dense(candidates: Sequence[Candidate], n: int) -> list[RankedContext]:
    """Baseline: keep the dense ordering, no re-ranking. Scores are negated
    distances so larger is better like every other strategy."""
    if not candidates:
        raise RerankError("no candidates to rank")
    scored = [(c.qa, -c.dense_distance) for c in candidates]
    return _take_top(scored, n, Strategy.DENSE_L2)


def rerank_bm25(
    candidates: Sequence[Candidate],
    query_text: str,
    params: Bm25Params = Bm25Params(),
    n: int = 4,
    stats: Bm25Stats | None = None,
) -> list[RankedContext]:
    """Lexical re-ranking over the candidate pool.

    Statistics default to pool-local (built from the candidates' own
    question+answer texts); pass prebuilt stats for global-corpus mode.
    """
    if not candidates:
        raise RerankError("no candidates to rank")
    if stats is None:
        stats = bm25_build({c.qa.id: list(tokenize(candidate_text(c.qa)).tokens) for c in candidates})
    query_tokens = tokenize(query_text).tokens
    scored = [(c.qa, bm25_score(stats, params, query_tokens, c.qa.id)) for c in candidates]
    return _take_top(scored, n, Strategy.BM25)


def rerank_late_interaction(
    candidates: Sequence[Candidate],
    query_token_matrix: np.ndarray,
    token_store: TokenStore,
    n: int = 4,
) -> list[RankedContext]:
    """Token-level re-ranking by summed max cosine similarity."""
    if not candidates:
        raise RerankError("no candidates to rank")
    missing = [c.qa.id for c in candidates if c.qa.id not in token_store]
    if missing:
        raise RerankError(f"token store is missing matrices for: {', '.join(sorted(missing))}")
    scored = [
        (c.qa, maxsim_score(query_token_matrix, token_store.matrix(c.qa.id)))
        for c in candidates
    ]
    return _take_top(scored, n, Strategy.LATE_INTERACTION)


def rerank_seq2seq(
    candidates: Sequence[Candidate],
    query_text: str,
    scorer: Callable[[str, str], float],
    n: int = 4,
    max_in_flight: int = 4,
) -> list[RankedContext]:
    """Re-ranking by an external relevance scorer returning a probability.

    Candidates are scored with at most `max_in_flight` concurrent calls;
    results are reassociated by position so completion order can't change
    the output.
    """
    if not candidates:
        raise RerankError("no candidates to rank")
    documents = [candidate_text(c.qa) for c in candidates]
    if max_in_flight > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            scores = list(pool.map(lambda doc: scorer(query_text, doc), documents))
    else:
        scores = [scorer(query_text, doc) for doc in documents]
    for c, score in zip(candidates, scores):
        if not isinstance(score, (int, float)) or math.isnan(score) or not 0.0 <= score <= 1.0:
            raise RerankError(f"scorer returned {score!r} for {c.qa.id}; expected a value in [0, 1]")
    scored = [(c.qa, float(s)) for c, s in zip(candidates, scores)]
    return _take_top(scored, n, Strategy.SEQ2SEQ_RELEVANCE)


def overlap_scorer(query: str, document: str) -> float:
    """Deterministic local relevance stub: unigram Dice overlap in [0, 1]."""
    q = Counter(tokenize(query).tokens)
    d = Counter(tokenize(document).tokens)
    total = sum(q.values()) + sum(d.values())
    if total == 0:
        return 0.0
    overlap = sum(min(count, d[tok]) for tok, count in q.items())
    return 2.0 * overlap / total
