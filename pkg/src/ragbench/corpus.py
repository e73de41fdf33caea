"""QA-pair corpus handling: JSONL ingestion, text cleaning, and seeded splits.

The corpus is the system of record; every other stage references pairs by
their stable string id.
"""

from __future__ import annotations

import json
import logging
import random
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

PARTITIONS = ("train", "validation", "test")


class CorpusError(ValueError):
    """Raised for malformed corpus files or invalid corpus operations."""


@dataclass(frozen=True)
class QaPair:
    id: str
    question: str
    answer: str
    source: str = ""


@dataclass(frozen=True)
class SplitAssignment:
    train_ids: frozenset[str]
    validation_ids: frozenset[str]
    test_ids: frozenset[str]
    seed: int
    ratios: tuple[float, float, float]

    def partition_of(self, pair_id: str) -> str:
        if pair_id in self.train_ids:
            return "train"
        if pair_id in self.validation_ids:
            return "validation"
        if pair_id in self.test_ids:
            return "test"
        raise KeyError(pair_id)


@dataclass(frozen=True)
class CorpusStats:
    pair_count: int
    mean_question_tokens: float
    mean_answer_tokens: float
    per_source: dict[str, int]


def ingest_jsonl(path: str | Path, strict: bool = False) -> list[QaPair]:
    """Read a JSONL corpus: one object per line with id/question/answer keys.

    Malformed lines are skipped with a warning, or fatal under strict mode.
    A duplicate id is always fatal.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"corpus file not found: {path}")
    pairs: list[QaPair] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                pair = _parse_record(line)
            except CorpusError as exc:
                if strict:
                    raise CorpusError(f"line {lineno}: {exc}") from None
                logger.warning("skipping line %d: %s", lineno, exc)
                continue
            if pair.id in seen:
                raise CorpusError(f"duplicate id {pair.id!r} on line {lineno}")
            seen.add(pair.id)
            pairs.append(pair)
    logger.info("ingested %d pairs from %s", len(pairs), path)
    return pairs


def _parse_record(line: str) -> QaPair:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"invalid JSON ({exc.msg})") from None
    if not isinstance(raw, dict):
        raise CorpusError("record is not an object")
    for key in ("id", "question", "answer"):
        if key not in raw:
            raise CorpusError(f"missing key {key!r}")
        if not isinstance(raw[key], str) or not raw[key].strip():
            raise CorpusError(f"key {key!r} must be a non-empty string")
    return QaPair(
        id=raw["id"],
        question=raw["question"],
        answer=raw["answer"],
        source=str(raw.get("source", "")),
    )


def clean_text(raw: str, abbreviations: Mapping[str, str] | None = None) -> str:
    """Normalize text: NFC, strip non-whitespace control characters, collapse
    whitespace, trim, and expand whole-token abbreviation matches."""
    text = unicodedata.normalize("NFC", raw)
    text = "".join(
        ch for ch in text
        if ch.isspace() or unicodedata.category(ch) not in ("Cc", "Cf")
    )
    tokens = text.split()
    if abbreviations:
        tokens = [abbreviations.get(tok, tok) for tok in tokens]
    return " ".join(tokens)


def load_abbreviations(path: str | Path) -> dict[str, str]:
    """Load a two-column TSV abbreviation table (term, expansion).

    Rejects tables whose expansions contain a term that is itself a key;
    that restriction keeps clean_text idempotent.
    """
    table: dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                raise CorpusError(f"abbreviation table line {lineno}: expected 'term<TAB>expansion'")
            table[parts[0].strip()] = parts[1].strip()
    for term, expansion in table.items():
        for tok in expansion.split():
            if tok in table:
                raise CorpusError(
                    f"expansion of {term!r} contains the abbreviation {tok!r}; "
                    "nested expansions are not supported"
                )
    return table


def clean_pairs(pairs: Iterable[QaPair], abbreviations: Mapping[str, str] | None = None) -> list[QaPair]:
    """Apply clean_text to every question and answer, dropping pairs that
    end up empty on either side."""
    cleaned: list[QaPair] = []
    for pair in pairs:
        question = clean_text(pair.question, abbreviations)
        answer = clean_text(pair.answer, abbreviations)
        if not question or not answer:
            logger.warning("dropping pair %s: empty after cleaning", pair.id)
            continue
        cleaned.append(QaPair(id=pair.id, question=question, answer=answer, source=pair.source))
    return cleaned


def split_corpus(
    pairs: Sequence[QaPair],
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
    seed: int = 0,
) -> SplitAssignment:
    """Partition ids into train/validation/test by a seeded uniform shuffle.

    Sizes are floor(N*r_train) and floor(N*r_val); the remainder goes to
    test. The assignment depends only on the id set, ratios, and seed.
    """
    if not pairs:
        raise CorpusError("cannot split an empty corpus")
    if any(r <= 0 for r in ratios):
        raise CorpusError(f"ratios must be positive, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusError(f"ratios must sum to 1, got {ratios}")
    ids = sorted({p.id for p in pairs})
    if len(ids) != len(pairs):
        raise CorpusError("duplicate ids in corpus")
    random.Random(seed).shuffle(ids)
    n = len(ids)
    n_train = int(n * ratios[0])
    n_val = int(n * ratios[1])
    return SplitAssignment(
        train_ids=frozenset(ids[:n_train]),
        validation_ids=frozenset(ids[n_train:n_train + n_val]),
        test_ids=frozenset(ids[n_train + n_val:]),
        seed=seed,
        ratios=tuple(ratios),
    )


def write_split_manifest(split: SplitAssignment, path: str | Path) -> None:
    """Write the split as JSONL of {id, partition}, sorted by id."""
    rows = [(pid, "train") for pid in split.train_ids]
    rows += [(pid, "validation") for pid in split.validation_ids]
    rows += [(pid, "test") for pid in split.test_ids]
    with Path(path).open("w", encoding="utf-8") as fh:
        for pid, part in sorted(rows):
            fh.write(json.dumps({"id": pid, "partition": part}, sort_keys=True) + "\n")


def read_split_manifest(path: str | Path) -> dict[str, str]:
    assignment: dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if row.get("partition") not in PARTITIONS:
                raise CorpusError(f"split manifest line {lineno}: bad partition {row.get('partition')!r}")
            assignment[row["id"]] = row["partition"]
    return assignment


def corpus_stats(pairs: Sequence[QaPair]) -> CorpusStats:
    """Counts and whitespace-token means over the corpus."""
    per_source: dict[str, int] = {}
    q_tokens = 0
    a_tokens = 0
    for pair in pairs:
        per_source[pair.source] = per_source.get(pair.source, 0) + 1
        q_tokens += len(pair.question.split())
        a_tokens += len(pair.answer.split())
    n = len(pairs)
    return CorpusStats(
        pair_count=n,
        mean_question_tokens=q_tokens / n if n else 0.0,
        mean_answer_tokens=a_tokens / n if n else 0.0,
        per_source=per_source,
    )
