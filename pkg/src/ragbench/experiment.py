"""End-to-end experiment runner: retrieve, re-rank, assemble, generate,
score, and report — reproducibly.

With no endpoints configured the run is fully model-free: stub embeddings,
the echo-top-context generator, and a local overlap relevance scorer. Fixed
config + stub services give byte-identical artifacts across runs and hosts.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import corpus as corpus_mod
from .corpus import QaPair, load_abbreviations
from .embeddings import (
    SentenceStore,
    TokenStore,
    build_stub_stores,
    read_sentence_store,
    read_token_store,
    stub_embed,
    stub_embed_tokens,
)
from .generate import (
    EndpointConfig,
    GenerationRequest,
    GenerationResponse,
    RelevanceClient,
    generate,
    stub_generate,
)
from .index import FlatIndex, build_index
from .metrics import MetricRow, aggregate, evaluate_pair
from .prompt import PromptBundle, assemble_prompt
from .rerank import (
    Bm25Params,
    Candidate,
    RankedContext,
    Strategy,
    overlap_scorer,
    rerank_bm25,
    rerank_dense,
    rerank_late_interaction,
    rerank_seq2seq,
)
from .report import ResultsRow, ResultsTable, emit_report, write_table_json

logger = logging.getLogger(__name__)

STRATEGY_LABELS = {
    Strategy.DENSE_L2: "DenseL2",
    Strategy.BM25: "BM25",
    Strategy.LATE_INTERACTION: "LateInteraction",
    Strategy.SEQ2SEQ_RELEVANCE: "Seq2SeqRelevance",
}


class ConfigError(ValueError):
    """Raised when an experiment configuration violates its invariants."""


@dataclass
class ExperimentConfig:
    corpus: str
    out_dir: str
    strategies: tuple[Strategy, ...] = (Strategy.DENSE_L2,)
    k: int = 16
    n: int = 4
    token_budget: int = 512
    seed: int = 0
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)
    test_file: str | None = None  # explicit held-out test set; overrides the split's test partition
    retrieval_partitions: tuple[str, ...] = ("train", "validation")
    sentence_store: str | None = None  # RBQE file; default: stub embeddings
    token_store: str | None = None  # RBQT file; default: stub embeddings
    query_store: str | None = None  # RBQE of per-test-pair query embeddings
    query_token_store: str | None = None
    embed_dim: int = 32
    embed_text: str = "question_answer"
    abbreviations: str | None = None
    generate_endpoint: str | None = None  # base URL; default: stub generator
    score_endpoint: str | None = None  # base URL; default: local overlap scorer
    endpoint_timeout: float = 30.0
    beam_size: int = 4
    length_penalty: float = 1.0
    max_new_tokens: int = 256
    bm25_k1: float = 1.5
    bm25_b: float = 0.75
    max_examples: int | None = None
    fail_fast: bool = False
    workers: int = 1
    worst_first_contexts: bool = False
    label_prefix: str = ""

    def validate(self) -> None:
        if self.k < 1 or self.n < 1:
            raise ConfigError(f"k and n must be >= 1, got k={self.k}, n={self.n}")
        if self.n > self.k:
            raise ConfigError(f"n ({self.n}) must not exceed k ({self.k})")
        if self.token_budget < 1:
            raise ConfigError("token budget must be >= 1")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError("duplicate strategies")
        if self.embed_text not in ("question_answer", "question"):
            raise ConfigError(f"unknown embed_text {self.embed_text!r}")
        bad = [p for p in self.retrieval_partitions if p not in corpus_mod.PARTITIONS]
        if bad or not self.retrieval_partitions:
            raise ConfigError(f"retrieval partitions must be drawn from {corpus_mod.PARTITIONS}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for name in ("corpus", "test_file", "sentence_store", "token_store",
                     "query_store", "query_token_store", "abbreviations"):
            value = getattr(self, name)
            if value is not None and not Path(value).is_file():
                raise ConfigError(f"{name} file does not exist: {value}")

    def semantic_dict(self) -> dict:
        """Fields that determine results; excludes out_dir and scheduling
        knobs so identical experiments hash identically."""
        data = asdict(self)
        for key in ("out_dir", "workers", "fail_fast", "endpoint_timeout"):
            data.pop(key)
        data["strategies"] = [s.value for s in self.strategies]
        return data

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


@dataclass
class ExampleOutcome:
    example_id: str
    strategy: Strategy
    candidate_ids: list[str]
    selected: list[RankedContext]
    bundle: PromptBundle
    response: GenerationResponse
    metrics: MetricRow


@dataclass
class ExperimentResult:
    table: ResultsTable
    rows_by_strategy: dict[Strategy, list[MetricRow]]
    failures: list[dict]
    manifest: dict
    out_dir: Path


@dataclass
class _Runtime:
    """Immutable per-run context shared across worker threads."""

    config: ExperimentConfig
    database: dict[str, QaPair]
    index: FlatIndex
    token_store: TokenStore | None
    query_vector: Callable[[QaPair], np.ndarray]
    query_tokens: Callable[[QaPair], np.ndarray]
    token_embedder: Callable[[str], np.ndarray]
    generator: Callable[[GenerationRequest, Sequence[RankedContext]], GenerationResponse]
    scorer: Callable[[str, str], float]


def _load_pairs(path: str, abbreviations: dict[str, str] | None) -> list[QaPair]:
    return corpus_mod.clean_pairs(corpus_mod.ingest_jsonl(path), abbreviations)


def _prepare(config: ExperimentConfig) -> tuple[_Runtime, list[QaPair]]:
    abbreviations = load_abbreviations(config.abbreviations) if config.abbreviations else None
    pairs = _load_pairs(config.corpus, abbreviations)
    if not pairs:
        raise ConfigError(f"corpus {config.corpus} has no usable pairs")
    split = corpus_mod.split_corpus(pairs, config.ratios, config.seed)

    if config.test_file:
        test_pairs = _load_pairs(config.test_file, abbreviations)
    else:
        test_pairs = [p for p in pairs if p.id in split.test_ids]
    test_pairs.sort(key=lambda p: p.id)
    if config.max_examples is not None:
        test_pairs = test_pairs[: config.max_examples]
    if not test_pairs:
        raise ConfigError("no test examples to evaluate")

    wanted = set(config.retrieval_partitions)
    database_pairs = [p for p in pairs if split.partition_of(p.id) in wanted]
    if not database_pairs:
        raise ConfigError("retrieval database is empty for the selected partitions")
    database = {p.id: p for p in database_pairs}

    if config.sentence_store:
        store = read_sentence_store(config.sentence_store)
        missing = [pid for pid in database if pid not in store]
        if missing:
            raise ConfigError(f"sentence store lacks {len(missing)} database ids (e.g. {missing[0]!r})")
        ids = [pid for pid in store.ids if pid in database]
        vectors = np.stack([store.vector(pid) for pid in ids])
        index = FlatIndex(ids=ids, vectors=vectors)
        dim = store.dim
    else:
        sentence_records, _ = build_stub_stores(
            database_pairs, config.embed_dim, config.seed, config.embed_text
        )
        index = FlatIndex(
            ids=[pid for pid, _ in sentence_records],
            vectors=np.stack([vec for _, vec in sentence_records]),
        )
        dim = config.embed_dim

    token_store: TokenStore | None = None
    if Strategy.LATE_INTERACTION in config.strategies:
        if config.token_store:
            token_store = read_token_store(config.token_store)
            missing = [pid for pid in database if pid not in token_store]
            if missing:
                raise ConfigError(f"token store lacks {len(missing)} database ids (e.g. {missing[0]!r})")
        else:
            token_store = TokenStore(dim=dim)
            for pair in database_pairs:
                text = pair.question if config.embed_text == "question" else f"{pair.question} {pair.answer}"
                token_store.ids.append(pair.id)
                token_store.matrices[pair.id] = stub_embed_tokens(text, dim, config.seed)

    if config.query_store:
        q_store = read_sentence_store(config.query_store)
        if q_store.dim != index.dim:
            raise ConfigError(f"query store dim {q_store.dim} != index dim {index.dim}")
        query_vector = lambda pair: q_store.vector(pair.id)
    else:
        query_vector = lambda pair: stub_embed(pair.question, dim, config.seed)

    if config.query_token_store:
        q_tokens = read_token_store(config.query_token_store)
        query_tokens = lambda pair: q_tokens.matrix(pair.id)
    else:
        query_tokens = lambda pair: stub_embed_tokens(pair.question, dim, config.seed)

    if config.generate_endpoint:
        endpoint = EndpointConfig(url=config.generate_endpoint, timeout=config.endpoint_timeout)
        generator = lambda request, contexts: generate(endpoint, request)
    else:
        generator = lambda request, contexts: stub_generate(request, contexts)

    if config.score_endpoint:
        scorer = RelevanceClient(
            EndpointConfig(url=config.score_endpoint, timeout=config.endpoint_timeout)
        )
    else:
        scorer = overlap_scorer

    token_embedder = lambda text: stub_embed_tokens(text, dim, config.seed)
    runtime = _Runtime(
        config=config,
        database=database,
        index=index,
        token_store=token_store,
        query_vector=query_vector,
        query_tokens=query_tokens,
        token_embedder=token_embedder,
        generator=generator,
        scorer=scorer,
    )
    return runtime, test_pairs


def _select_contexts(
    runtime: _Runtime, strategy: Strategy, pair: QaPair, candidates: list[Candidate]
) -> list[RankedContext]:
    config = runtime.config
    if strategy is Strategy.DENSE_L2:
        return rerank_dense(candidates, config.n)
    if strategy is Strategy.BM25:
        return rerank_bm25(
            candidates, pair.question, Bm25Params(k1=config.bm25_k1, b=config.bm25_b), config.n
        )
    if strategy is Strategy.LATE_INTERACTION:
        return rerank_late_interaction(
            candidates, runtime.query_tokens(pair), runtime.token_store, config.n
        )
    return rerank_seq2seq(candidates, pair.question, runtime.scorer, config.n)


def _run_example(runtime: _Runtime, pair: QaPair) -> list[ExampleOutcome]:
    config = runtime.config
    neighbors = runtime.index.search(runtime.query_vector(pair), config.k)
    candidates = [
        Candidate(qa=runtime.database[nb.id], dense_distance=nb.distance) for nb in neighbors
    ]
    outcomes = []
    for strategy in config.strategies:
        selected = _select_contexts(runtime, strategy, pair, candidates)
        bundle = assemble_prompt(
            pair.question, selected, config.token_budget, worst_first=config.worst_first_contexts
        )
        request = GenerationRequest(
            prompt=bundle.rendered,
            beam_size=config.beam_size,
            length_penalty=config.length_penalty,
            max_new_tokens=config.max_new_tokens,
            timeout=config.endpoint_timeout,
        )
        response = runtime.generator(request, selected)
        row = evaluate_pair(response.text, pair.answer, runtime.token_embedder, pair.id)
        outcomes.append(
            ExampleOutcome(
                example_id=pair.id,
                strategy=strategy,
                candidate_ids=[nb.id for nb in neighbors],
                selected=selected,
                bundle=bundle,
                response=response,
                metrics=row,
            )
        )
    return outcomes


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute the configured strategies over the test set and write the
    per-example artifacts, report files, and reproducibility manifest."""
    config.validate()
    started = time.time()
    runtime, test_pairs = _prepare(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    outcomes_by_id: dict[str, list[ExampleOutcome]] = {}
    failures: list[dict] = []

    def worker(pair: QaPair) -> tuple[str, list[ExampleOutcome] | None, str | None]:
        try:
            return pair.id, _run_example(runtime, pair), None
        except Exception as exc:  # noqa: BLE001 - per-example isolation is the contract
            if config.fail_fast:
                raise
            return pair.id, None, f"{type(exc).__name__}: {exc}"

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(worker, test_pairs))
    else:
        results = [worker(pair) for pair in test_pairs]
    for example_id, outcomes, error in results:
        if error is not None:
            logger.warning("example %s failed: %s", example_id, error)
            failures.append({"id": example_id, "error": error})
        else:
            outcomes_by_id[example_id] = outcomes

    if not outcomes_by_id:
        raise ConfigError("every example failed; nothing to report")

    model_tags: set[str] = set()
    rows_by_strategy: dict[Strategy, list[MetricRow]] = {s: [] for s in config.strategies}
    for example_id in sorted(outcomes_by_id):
        for outcome in outcomes_by_id[example_id]:
            rows_by_strategy[outcome.strategy].append(outcome.metrics)
            model_tags.add(outcome.response.model_tag)

    provenance = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "model_tags": ",".join(sorted(model_tags)),
        "examples": len(outcomes_by_id),
    }
    table = ResultsTable(rows=[], provenance=provenance)
    for strategy in config.strategies:
        summary = aggregate(rows_by_strategy[strategy])
        table.rows.append(
            ResultsRow(
                label=f"{config.label_prefix}{STRATEGY_LABELS[strategy]}",
                bleu1=summary.bleu1,
                rouge1=summary.rouge1,
                bertscore_p=summary.bertscore_p,
                meteor=summary.meteor,
            )
        )

    _write_artifacts(config, out_dir, outcomes_by_id, failures, table, started)
    return ExperimentResult(
        table=table,
        rows_by_strategy=rows_by_strategy,
        failures=failures,
        manifest=json.loads((out_dir / "manifest.json").read_text(encoding="utf-8")),
        out_dir=out_dir,
    )


def _outcome_record(outcome: ExampleOutcome) -> dict:
    row = outcome.metrics
    return {
        "id": outcome.example_id,
        "strategy": outcome.strategy.value,
        "candidates": outcome.candidate_ids,
        "selected": [
            {"id": ctx.qa.id, "rank": ctx.rank, "score": ctx.score} for ctx in outcome.selected
        ],
        "prompt_tokens": outcome.bundle.token_count,
        "dropped_contexts": outcome.bundle.dropped_contexts,
        "generated": outcome.response.text,
        "bleu1": row.bleu1,
        "rouge1": row.rouge1,
        "bertscore_p": row.bertscore_p,
        "meteor": row.meteor,
        "flags": list(row.flags),
    }


def _write_artifacts(
    config: ExperimentConfig,
    out_dir: Path,
    outcomes_by_id: dict[str, list[ExampleOutcome]],
    failures: list[dict],
    table: ResultsTable,
    started: float,
) -> None:
    for strategy in config.strategies:
        path = out_dir / f"examples_{strategy.value}.jsonl"
        with path.open("w", encoding="utf-8") as fh:
            for example_id in sorted(outcomes_by_id):
                for outcome in outcomes_by_id[example_id]:
                    if outcome.strategy is strategy:
                        fh.write(json.dumps(_outcome_record(outcome), sort_keys=True) + "\n")
    write_table_json(table, out_dir / "results.json")
    emit_report(table, "markdown", out_dir / "report.md")
    emit_report(table, "csv", out_dir / "report.csv")
    # wall-clock facts stay out of the report files so those remain
    # byte-identical across reruns
    manifest = {
        "config": config.semantic_dict(),
        "config_hash": config.config_hash(),
        "started_unix": started,
        "duration_seconds": time.time() - started,
        "platform": platform.platform(),
        "python": platform.python_version(),
        "failures": failures,
        "examples_evaluated": len(outcomes_by_id),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
