"""Results tables: fixed-layout reports and between-run deltas.

Columns are always Model, BLEU-1, ROUGE-1, BERTScore, METEOR with values
printed to 4 decimals. Report files carry only deterministic provenance
(config hash, seed, model tags); wall-clock timestamps live in the run
manifest so reports stay byte-reproducible.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

COLUMNS = ("Model", "BLEU-1", "ROUGE-1", "BERTScore", "METEOR")
METRIC_KEYS = ("bleu1", "rouge1", "bertscore_p", "meteor")


class ReportError(ValueError):
    """Raised for empty tables, malformed files, or mismatched comparisons."""


@dataclass(frozen=True)
class ResultsRow:
    label: str
    bleu1: float
    rouge1: float
    bertscore_p: float
    meteor: float

    def values(self) -> tuple[float, float, float, float]:
        return (self.bleu1, self.rouge1, self.bertscore_p, self.meteor)


@dataclass
class ResultsTable:
    rows: list[ResultsRow]
    provenance: dict = field(default_factory=dict)  # config_hash, seed, model_tags, ...


@dataclass(frozen=True)
class RowDelta:
    label: str
    metric: str
    before: float
    after: float
    absolute: float
    percent: float | None  # None when the baseline is zero


def _fmt(value: float) -> str:
    return f"{value:.4f}"


def render_markdown(table: ResultsTable) -> str:
    if not table.rows:
        raise ReportError("cannot render an empty table")
    lines = ["| " + " | ".join(COLUMNS) + " |"]
    lines.append("|" + "|".join("---" for _ in COLUMNS) + "|")
    for row in table.rows:
        cells = [row.label] + [_fmt(v) for v in row.values()]
        lines.append("| " + " | ".join(cells) + " |")
    if table.provenance:
        lines.append("")
        for key in sorted(table.provenance):
            lines.append(f"- {key}: {table.provenance[key]}")
    return "\n".join(lines) + "\n"


def render_csv(table: ResultsTable) -> str:
    if not table.rows:
        raise ReportError("cannot render an empty table")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in table.rows:
        writer.writerow([row.label] + [_fmt(v) for v in row.values()])
    return buf.getvalue()


def emit_report(table: ResultsTable, fmt: str, path: str | Path) -> Path:
    """Write the table as markdown or CSV; returns the output path."""
    if fmt == "markdown":
        text = render_markdown(table)
    elif fmt == "csv":
        text = render_csv(table)
    else:
        raise ReportError(f"unknown report format {fmt!r}")
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


def read_report_csv(path: str | Path) -> ResultsTable:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != COLUMNS:
            raise ReportError(f"unexpected CSV header: {header}")
        rows = [
            ResultsRow(
                label=record[0],
                bleu1=float(record[1]),
                rouge1=float(record[2]),
                bertscore_p=float(record[3]),
                meteor=float(record[4]),
            )
            for record in reader
            if record
        ]
    return ResultsTable(rows=rows)


def table_to_dict(table: ResultsTable) -> dict:
    return {
        "rows": [
            {"label": row.label, **{key: getattr(row, key) for key in METRIC_KEYS}}
            for row in table.rows
        ],
        "provenance": table.provenance,
    }


def table_from_dict(data: dict) -> ResultsTable:
    rows = [
        ResultsRow(
            label=raw["label"],
            **{key: float(raw[key]) for key in METRIC_KEYS},
        )
        for raw in data.get("rows", [])
    ]
    return ResultsTable(rows=rows, provenance=dict(data.get("provenance", {})))


def write_table_json(table: ResultsTable, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(table_to_dict(table), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_table_json(path: str | Path) -> ResultsTable:
    return table_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def compare_runs(table_a: ResultsTable, table_b: ResultsTable) -> list[RowDelta]:
    """Per-label, per-metric differences from table_a to table_b.

    Labels must match one-to-one; percent deltas are relative to table_a.
    """
    labels_a = [row.label for row in table_a.rows]
    labels_b = [row.label for row in table_b.rows]
    if sorted(labels_a) != sorted(labels_b):
        raise ReportError(f"row labels differ: {labels_a} vs {labels_b}")
    by_label_b = {row.label: row for row in table_b.rows}
    deltas: list[RowDelta] = []
    for row_a in table_a.rows:
        row_b = by_label_b[row_a.label]
        for key in METRIC_KEYS:
            before = getattr(row_a, key)
            after = getattr(row_b, key)
            deltas.append(
                RowDelta(
                    label=row_a.label,
                    metric=key,
                    before=before,
                    after=after,
                    absolute=after - before,
                    percent=((after - before) / before * 100.0) if before != 0 else None,
                )
            )
    return deltas


def render_deltas(deltas: Sequence[RowDelta]) -> str:
    lines = ["| Model | Metric | Before | After | Delta | Delta % |", "|---|---|---|---|---|---|"]
    for d in deltas:
        pct = f"{d.percent:+.1f}%" if d.percent is not None else "n/a"
        lines.append(
            f"| {d.label} | {d.metric} | {_fmt(d.before)} | {_fmt(d.after)} "
            f"| {d.absolute:+.4f} | {pct} |"
        )
    return "\n".join(lines) + "\n"
