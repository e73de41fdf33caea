"""Command-line entry point.

Subcommands cover each pipeline stage (ingest, split, build-index, retrieve,
rerank, assemble, generate, evaluate) plus full experiment runs and report
rendering. Settings resolve as flag > environment (RAGBENCH_*) > config
file > built-in default; config files may be TOML or JSON.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any

from . import corpus as corpus_mod
from .embeddings import (
    build_stub_stores,
    read_sentence_store,
    read_token_store,
    store_checksum,
    stub_embed,
    stub_embed_tokens,
    write_sentence_store,
    write_token_store,
)
from .experiment import ExperimentConfig, run_experiment
from .generate import EndpointConfig, GenerationRequest, generate
from .index import build_index
from .metrics import aggregate, evaluate_pair
from .prompt import assemble_prompt
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
from .report import (
    compare_runs,
    emit_report,
    read_table_json,
    render_deltas,
    render_markdown,
)

ENV_PREFIX = "RAGBENCH_"


def _load_config_file(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    text = Path(path).read_bytes()
    if path.endswith(".json"):
        return json.loads(text)
    try:
        import tomllib  # py311+
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(text.decode("utf-8"))


def _setting(args: argparse.Namespace, file_cfg: dict, name: str, default: Any, cast=None) -> Any:
    """flag > env > config file > default"""
    flag = getattr(args, name, None)
    if flag is not None:
        return flag
    env = os.environ.get(ENV_PREFIX + name.upper())
    if env is not None:
        return cast(env) if cast else env
    if name in file_cfg:
        return file_cfg[name]
    return default


def _parse_strategies(raw: str) -> tuple[Strategy, ...]:
    if raw == "all":
        return tuple(Strategy)
    return tuple(Strategy(part.strip()) for part in raw.split(","))


def _parse_ratios(raw: str) -> tuple[float, float, float]:
    parts = [float(p) for p in raw.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ratios must be three comma-separated fractions")
    return (parts[0], parts[1], parts[2])


def _print_json(data: Any) -> None:
    print(json.dumps(data, indent=2, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ragbench", description=__doc__)
    parser.add_argument("--config", help="TOML or JSON settings file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--strategy", default=None,
                        help="comma-separated strategy names or 'all' "
                             f"(choices: {', '.join(s.value for s in Strategy)})")
    parser.add_argument("--k", type=int, default=None, help="first-stage candidate count")
    parser.add_argument("--n", type=int, default=None, help="final context count")
    parser.add_argument("--budget", type=int, default=None, help="prompt token budget")
    parser.add_argument("--endpoint", default=None, help="generation service base URL")
    parser.add_argument("--out", default=None, help="output file or directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a JSONL corpus and print its stats")
    p.add_argument("--corpus", required=True)
    p.add_argument("--abbreviations", help="two-column TSV of term/expansion")
    p.add_argument("--strict", action="store_true", help="fail on any malformed line")
    p.add_argument("--cleaned-out", help="write the cleaned corpus here")

    p = sub.add_parser("split", help="write a train/validation/test split manifest")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ratios", type=_parse_ratios, default=(0.70, 0.15, 0.15))

    p = sub.add_parser("build-index", help="write stub embedding stores plus a build manifest")
    p.add_argument("--corpus", required=True)
    p.add_argument("--store", required=True, help="output sentence store (.rbqe)")
    p.add_argument("--token-store", help="optional output token store (.rbqt)")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--embed-text", choices=("question_answer", "question"),
                   default="question_answer")

    p = sub.add_parser("retrieve", help="nearest neighbors for a query")
    p.add_argument("--store", required=True)
    p.add_argument("--query", required=True)

    p = sub.add_parser("rerank", help="retrieve then apply one strategy")
    p.add_argument("--corpus", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--token-store")
    p.add_argument("--query", required=True)
    p.add_argument("--score-endpoint", help="relevance service base URL (seq2seq strategy)")

    p = sub.add_parser("assemble", help="render a prompt from reranked contexts")
    p.add_argument("--query", required=True)
    p.add_argument("--contexts", required=True, help="JSON file produced by the rerank command")
    p.add_argument("--worst-first", action="store_true")

    p = sub.add_parser("generate", help="call the generation service once")
    p.add_argument("--prompt", help="prompt text (or use --prompt-file)")
    p.add_argument("--prompt-file")
    p.add_argument("--beam-size", type=int, default=4)
    p.add_argument("--length-penalty", type=float, default=1.0)
    p.add_argument("--max-new-tokens", type=int, default=256)
    p.add_argument("--timeout", type=float, default=30.0)

    p = sub.add_parser("evaluate", help="score generated/reference pairs from a JSONL file")
    p.add_argument("--pairs", required=True, help="JSONL with id, generated, reference")
    p.add_argument("--dim", type=int, default=32)

    p = sub.add_parser("experiment", help="run the full pipeline and write reports")
    p.add_argument("--corpus")
    p.add_argument("--test-file")
    p.add_argument("--sentence-store")
    p.add_argument("--token-store")
    p.add_argument("--score-endpoint")
    p.add_argument("--label-prefix")
    p.add_argument("--max-examples", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--fail-fast", action="store_true")

    p = sub.add_parser("report", help="render a results table, optionally comparing two runs")
    p.add_argument("--table", required=True, help="results.json from an experiment")
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    p.add_argument("--compare", help="second results.json; prints per-metric deltas")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    file_cfg = _load_config_file(args.config or os.environ.get(ENV_PREFIX + "CONFIG"))
    try:
        handler = _HANDLERS[args.command]
        return handler(args, file_cfg)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        if args.verbose:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _cmd_ingest(args: argparse.Namespace, file_cfg: dict) -> int:
    abbreviations = (
        corpus_mod.load_abbreviations(args.abbreviations) if args.abbreviations else None
    )
    pairs = corpus_mod.ingest_jsonl(args.corpus, strict=args.strict)
    cleaned = corpus_mod.clean_pairs(pairs, abbreviations)
    stats = corpus_mod.corpus_stats(cleaned)
    if args.cleaned_out:
        with Path(args.cleaned_out).open("w", encoding="utf-8") as fh:
            for pair in cleaned:
                fh.write(json.dumps({
                    "id": pair.id, "question": pair.question,
                    "answer": pair.answer, "source": pair.source,
                }, sort_keys=True) + "\n")
    _print_json({
        "ingested": len(pairs),
        "cleaned": stats.pair_count,
        "mean_question_tokens": stats.mean_question_tokens,
        "mean_answer_tokens": stats.mean_answer_tokens,
        "per_source": stats.per_source,
    })
    return 0


def _cmd_split(args: argparse.Namespace, file_cfg: dict) -> int:
    seed = _setting(args, file_cfg, "seed", 0, int)
    out = _setting(args, file_cfg, "out", None)
    if not out:
        raise ValueError("split needs --out for the manifest path")
    pairs = corpus_mod.ingest_jsonl(args.corpus)
    split = corpus_mod.split_corpus(pairs, args.ratios, seed)
    corpus_mod.write_split_manifest(split, out)
    _print_json({
        "train": len(split.train_ids),
        "validation": len(split.validation_ids),
        "test": len(split.test_ids),
        "seed": seed,
        "manifest": str(out),
    })
    return 0


def _cmd_build_index(args: argparse.Namespace, file_cfg: dict) -> int:
    seed = _setting(args, file_cfg, "seed", 0, int)
    pairs = corpus_mod.clean_pairs(corpus_mod.ingest_jsonl(args.corpus))
    sentence_records, token_records = build_stub_stores(pairs, args.dim, seed, args.embed_text)
    count = write_sentence_store(sentence_records, args.store)
    manifest = {
        "store": str(args.store),
        "dim": args.dim,
        "count": count,
        "seed": seed,
        "embed_text": args.embed_text,
        "sha256": store_checksum(args.store),
    }
    if args.token_store:
        write_token_store(token_records, args.token_store)
        manifest["token_store"] = str(args.token_store)
        manifest["token_sha256"] = store_checksum(args.token_store)
    Path(str(args.store) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _print_json(manifest)
    return 0


def _cmd_retrieve(args: argparse.Namespace, file_cfg: dict) -> int:
    seed = _setting(args, file_cfg, "seed", 0, int)
    k = _setting(args, file_cfg, "k", 16, int)
    store = read_sentence_store(args.store)
    index = build_index(store)
    query_vec = stub_embed(args.query, store.dim, seed)
    neighbors = index.search(query_vec, k)
    _print_json([{"id": nb.id, "distance": nb.distance} for nb in neighbors])
    return 0


def _context_record(ctx: RankedContext) -> dict:
    return {
        "id": ctx.qa.id,
        "question": ctx.qa.question,
        "answer": ctx.qa.answer,
        "score": ctx.score,
        "rank": ctx.rank,
        "strategy": ctx.strategy.value,
    }


def _cmd_rerank(args: argparse.Namespace, file_cfg: dict) -> int:
    seed = _setting(args, file_cfg, "seed", 0, int)
    k = _setting(args, file_cfg, "k", 16, int)
    n = _setting(args, file_cfg, "n", 4, int)
    strategies = _parse_strategies(_setting(args, file_cfg, "strategy", "dense_l2"))
    if len(strategies) != 1:
        raise ValueError("rerank takes exactly one strategy")
    strategy = strategies[0]
    pairs = {p.id: p for p in corpus_mod.clean_pairs(corpus_mod.ingest_jsonl(args.corpus))}
    store = read_sentence_store(args.store)
    index = build_index(store)
    query_vec = stub_embed(args.query, store.dim, seed)
    candidates = []
    for nb in index.search(query_vec, k):
        if nb.id not in pairs:
            raise ValueError(f"store id {nb.id!r} is not in the corpus")
        candidates.append(Candidate(qa=pairs[nb.id], dense_distance=nb.distance))
    if strategy is Strategy.DENSE_L2:
        ranked = rerank_dense(candidates, n)
    elif strategy is Strategy.BM25:
        ranked = rerank_bm25(candidates, args.query, Bm25Params(), n)
    elif strategy is Strategy.LATE_INTERACTION:
        if not args.token_store:
            raise ValueError("late_interaction needs --token-store")
        token_store = read_token_store(args.token_store)
        query_tokens = stub_embed_tokens(args.query, store.dim, seed)
        ranked = rerank_late_interaction(candidates, query_tokens, token_store, n)
    else:
        if args.score_endpoint:
            from .generate import RelevanceClient

            scorer = RelevanceClient(EndpointConfig(url=args.score_endpoint))
        else:
            scorer = overlap_scorer
        ranked = rerank_seq2seq(candidates, args.query, scorer, n)
    _print_json([_context_record(ctx) for ctx in ranked])
    return 0


def _cmd_assemble(args: argparse.Namespace, file_cfg: dict) -> int:
    budget = _setting(args, file_cfg, "budget", 512, int)
    raw = json.loads(Path(args.contexts).read_text(encoding="utf-8"))
    contexts = [
        RankedContext(
            qa=corpus_mod.QaPair(
                id=rec["id"], question=rec["question"], answer=rec["answer"],
            ),
            score=float(rec["score"]),
            rank=int(rec["rank"]),
            strategy=Strategy(rec.get("strategy", "dense_l2")),
        )
        for rec in raw
    ]
    bundle = assemble_prompt(args.query, contexts, budget, worst_first=args.worst_first)
    _print_json({
        "rendered": bundle.rendered,
        "token_count": bundle.token_count,
        "dropped_contexts": bundle.dropped_contexts,
        "kept": [ctx.qa.id for ctx in bundle.contexts],
    })
    return 0


def _cmd_generate(args: argparse.Namespace, file_cfg: dict) -> int:
    endpoint_url = _setting(args, file_cfg, "endpoint", None)
    if not endpoint_url:
        raise ValueError("generate needs --endpoint (or RAGBENCH_ENDPOINT)")
    if bool(args.prompt) == bool(args.prompt_file):
        raise ValueError("provide exactly one of --prompt / --prompt-file")
    prompt = args.prompt or Path(args.prompt_file).read_text(encoding="utf-8")
    request = GenerationRequest(
        prompt=prompt,
        beam_size=args.beam_size,
        length_penalty=args.length_penalty,
        max_new_tokens=args.max_new_tokens,
        timeout=args.timeout,
    )
    response = generate(EndpointConfig(url=endpoint_url, timeout=args.timeout), request)
    _print_json({
        "text": response.text,
        "model_tag": response.model_tag,
        "latency_seconds": response.latency,
    })
    return 0


def _cmd_evaluate(args: argparse.Namespace, file_cfg: dict) -> int:
    seed = _setting(args, file_cfg, "seed", 0, int)
    out = _setting(args, file_cfg, "out", None)
    embedder = lambda text: stub_embed_tokens(text, args.dim, seed)
    rows = []
    with Path(args.pairs).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            rows.append(
                evaluate_pair(rec["generated"], rec["reference"], embedder, rec.get("id", ""))
            )
    if not rows:
        raise ValueError("no pairs to evaluate")
    summary = aggregate(rows)
    if out:
        with Path(out).open("w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps({
                    "id": row.id, "bleu1": row.bleu1, "rouge1": row.rouge1,
                    "bertscore_p": row.bertscore_p, "meteor": row.meteor,
                    "flags": list(row.flags),
                }, sort_keys=True) + "\n")
    _print_json({
        "bleu1": summary.bleu1,
        "rouge1": summary.rouge1,
        "bertscore_p": summary.bertscore_p,
        "meteor": summary.meteor,
        "examples": summary.example_count,
        "degenerate": summary.degenerate_count,
    })
    return 0


def _cmd_experiment(args: argparse.Namespace, file_cfg: dict) -> int:
    def setting(name: str, default: Any, cast=None) -> Any:
        return _setting(args, file_cfg, name, default, cast)

    corpus_path = setting("corpus", None)
    out_dir = setting("out", None) or file_cfg.get("out_dir")
    if not corpus_path or not out_dir:
        raise ValueError("experiment needs --corpus and --out")
    strategies_raw = _setting(args, file_cfg, "strategy", None) or file_cfg.get("strategies")
    if strategies_raw is None:
        strategies = (Strategy.DENSE_L2,)
    elif isinstance(strategies_raw, str):
        strategies = _parse_strategies(strategies_raw)
    else:
        strategies = tuple(Strategy(s) for s in strategies_raw)
    budget = _setting(args, file_cfg, "budget", None, int)
    if budget is None:
        budget = int(file_cfg.get("token_budget", 512))
    config = ExperimentConfig(
        corpus=corpus_path,
        out_dir=str(out_dir),
        strategies=strategies,
        k=setting("k", 16, int),
        n=setting("n", 4, int),
        token_budget=budget,
        seed=setting("seed", 0, int),
        ratios=tuple(file_cfg.get("ratios", (0.70, 0.15, 0.15))),
        test_file=setting("test_file", None),
        retrieval_partitions=tuple(file_cfg.get("retrieval_partitions", ("train", "validation"))),
        sentence_store=setting("sentence_store", None),
        token_store=setting("token_store", None),
        query_store=file_cfg.get("query_store"),
        query_token_store=file_cfg.get("query_token_store"),
        embed_dim=int(file_cfg.get("embed_dim", 32)),
        embed_text=file_cfg.get("embed_text", "question_answer"),
        abbreviations=file_cfg.get("abbreviations"),
        generate_endpoint=setting("endpoint", None) or file_cfg.get("generate_endpoint"),
        score_endpoint=setting("score_endpoint", None),
        endpoint_timeout=float(file_cfg.get("endpoint_timeout", 30.0)),
        beam_size=int(file_cfg.get("beam_size", 4)),
        length_penalty=float(file_cfg.get("length_penalty", 1.0)),
        max_new_tokens=int(file_cfg.get("max_new_tokens", 256)),
        bm25_k1=float(file_cfg.get("bm25_k1", 1.5)),
        bm25_b=float(file_cfg.get("bm25_b", 0.75)),
        max_examples=setting("max_examples", None),
        fail_fast=bool(args.fail_fast or file_cfg.get("fail_fast", False)),
        workers=setting("workers", 1, int) or 1,
        worst_first_contexts=bool(file_cfg.get("worst_first_contexts", False)),
        label_prefix=setting("label_prefix", None) or file_cfg.get("label_prefix", ""),
    )
    result = run_experiment(config)
    print(render_markdown(result.table))
    print(f"artifacts: {result.out_dir}")
    if result.failures:
        print(f"failed examples: {len(result.failures)} (see manifest.json)", file=sys.stderr)
    return 0


def _cmd_report(args: argparse.Namespace, file_cfg: dict) -> int:
    table = read_table_json(args.table)
    if args.compare:
        other = read_table_json(args.compare)
        print(render_deltas(compare_runs(table, other)), end="")
        return 0
    out = _setting(args, file_cfg, "out", None)
    if out:
        emit_report(table, args.format, out)
        print(f"wrote {out}")
    else:
        if args.format == "markdown":
            print(render_markdown(table), end="")
        else:
            from .report import render_csv

            print(render_csv(table), end="")
    return 0


_HANDLERS = {
    "ingest": _cmd_ingest,
    "split": _cmd_split,
    "build-index": _cmd_build_index,
    "retrieve": _cmd_retrieve,
    "rerank": _cmd_rerank,
    "assemble": _cmd_assemble,
    "generate": _cmd_generate,
    "evaluate": _cmd_evaluate,
    "experiment": _cmd_experiment,
    "report": _cmd_report,
}


if __name__ == "__main__":
    raise SystemExit(main())
