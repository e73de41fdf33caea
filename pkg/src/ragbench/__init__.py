"""Experiment engine for retrieval-augmented long-form question answering.

Pipeline: ingest QA pairs, embed (real stores or deterministic stubs),
retrieve with an exact flat-L2 index, re-rank under one of four strategies,
assemble a budgeted prompt, delegate generation to an external service (or
a stub), and score outputs with from-scratch NLG metrics.
"""

__version__ = "0.1.0"

from .corpus import QaPair, SplitAssignment, clean_text, corpus_stats, ingest_jsonl, split_corpus
from .embeddings import (
    SentenceStore,
    TokenStore,
    cosine,
    mean_pool,
    read_sentence_store,
    read_token_store,
    stub_embed,
    stub_embed_tokens,
    write_sentence_store,
    write_token_store,
)
from .generate import GenerationRequest, GenerationResponse, generate, stub_generate
from .index import FlatIndex, Neighbor, build_index, l2_distance_sq
from .metrics import (
    MeteorParams,
    MetricRow,
    MetricSummary,
    aggregate,
    bertscore_precision,
    bleu1,
    evaluate_pair,
    meteor,
    rouge1_recall,
    tokenize,
)
from .prompt import PromptBundle, assemble_prompt, count_tokens, render_context
from .rerank import (
    Bm25Params,
    Candidate,
    RankedContext,
    Strategy,
    bm25_build,
    bm25_score,
    maxsim_score,
    rerank_bm25,
    rerank_dense,
    rerank_late_interaction,
    rerank_seq2seq,
)
from .report import ResultsRow, ResultsTable, compare_runs, emit_report

__all__ = [name for name in dir() if not name.startswith("_")]
