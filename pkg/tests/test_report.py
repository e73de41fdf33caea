import pytest

from ragbench.report import (
    ReportError,
    ResultsRow,
    ResultsTable,
    compare_runs,
    emit_report,
    read_report_csv,
    read_table_json,
    render_deltas,
    render_markdown,
    table_from_dict,
    table_to_dict,
    write_table_json,
)

PUBLISHED_ROWS = [
    ResultsRow("Base T5 + FAISS", 0.2065, 0.2618, 0.1132, 0.1948),
    ResultsRow("Finetuned T5 + FAISS", 0.2415, 0.2918, 0.2054, 0.2264),
    ResultsRow("Finetuned T5 + BM25", 0.2221, 0.2714, 0.1318, 0.2054),
    ResultsRow("Finetuned T5 + ColBERT", 0.2218, 0.2713, 0.1364, 0.2053),
    ResultsRow("Finetuned T5 + MonoT5", 0.2172, 0.2632, 0.1277, 0.2023),
]


class TestRender:
    def test_markdown_four_decimal_layout(self):
        table = ResultsTable(rows=list(PUBLISHED_ROWS))
        text = render_markdown(table)
        lines = text.splitlines()
        assert lines[0] == "| Model | BLEU-1 | ROUGE-1 | BERTScore | METEOR |"
        assert "| Finetuned T5 + FAISS | 0.2415 | 0.2918 | 0.2054 | 0.2264 |" in lines

    def test_rounding_to_four_decimals(self):
        table = ResultsTable(rows=[ResultsRow("x", 0.123449, 0.5, 0.25, 1 / 3)])
        text = render_markdown(table)
        assert "| x | 0.1234 | 0.5000 | 0.2500 | 0.3333 |" in text

    def test_empty_table_rejected(self, tmp_path):
        with pytest.raises(ReportError):
            render_markdown(ResultsTable(rows=[]))
        with pytest.raises(ReportError):
            emit_report(ResultsTable(rows=[]), "csv", tmp_path / "r.csv")

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ReportError):
            emit_report(ResultsTable(rows=list(PUBLISHED_ROWS)), "pdf", tmp_path / "r.pdf")

    def test_provenance_block_in_markdown(self):
        table = ResultsTable(rows=PUBLISHED_ROWS[:1], provenance={"seed": 3, "config_hash": "ff"})
        text = render_markdown(table)
        assert "- config_hash: ff" in text
        assert "- seed: 3" in text


class TestCsvRoundTrip:
    def test_values_survive_reparse(self, tmp_path):
        table = ResultsTable(rows=list(PUBLISHED_ROWS))
        path = emit_report(table, "csv", tmp_path / "report.csv")
        loaded = read_report_csv(path)
        assert [row.label for row in loaded.rows] == [row.label for row in table.rows]
        for got, expect in zip(loaded.rows, table.rows):
            # published values are exactly 4 decimals, so they round-trip exactly
            assert got.values() == expect.values()

    def test_header_validated(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ReportError):
            read_report_csv(path)

    def test_json_roundtrip(self, tmp_path):
        table = ResultsTable(rows=list(PUBLISHED_ROWS), provenance={"seed": 1})
        path = tmp_path / "t.json"
        write_table_json(table, path)
        loaded = read_table_json(path)
        assert loaded.rows == table.rows
        assert loaded.provenance == {"seed": 1}
        assert table_from_dict(table_to_dict(table)).rows == table.rows


class TestCompare:
    def test_published_improvement_percentages(self):
        base = ResultsTable(rows=[ResultsRow("FAISS", 0.2065, 0.2618, 0.1132, 0.1948)])
        tuned = ResultsTable(rows=[ResultsRow("FAISS", 0.2415, 0.2918, 0.2054, 0.2264)])
        deltas = {d.metric: d for d in compare_runs(base, tuned)}
        # 0.2065 -> 0.2415 is a 17% BLEU-1 gain; 0.1132 -> 0.2054 is +81% BERTScore
        assert deltas["bleu1"].percent == pytest.approx(17.0, abs=0.1)
        assert deltas["bertscore_p"].percent == pytest.approx(81.0, abs=1.0)
        assert deltas["bleu1"].absolute == pytest.approx(0.035, abs=1e-12)

    def test_identical_tables_zero_deltas(self):
        table = ResultsTable(rows=list(PUBLISHED_ROWS))
        for delta in compare_runs(table, table):
            assert delta.absolute == 0.0
            assert delta.percent == 0.0

    def test_label_mismatch_rejected(self):
        a = ResultsTable(rows=[PUBLISHED_ROWS[0]])
        b = ResultsTable(rows=[PUBLISHED_ROWS[1]])
        with pytest.raises(ReportError, match="labels"):
            compare_runs(a, b)

    def test_zero_baseline_has_no_percent(self):
        a = ResultsTable(rows=[ResultsRow("x", 0.0, 0.1, 0.1, 0.1)])
        b = ResultsTable(rows=[ResultsRow("x", 0.2, 0.1, 0.1, 0.1)])
        deltas = {d.metric: d for d in compare_runs(a, b)}
        assert deltas["bleu1"].percent is None
        assert "n/a" in render_deltas([deltas["bleu1"]])
