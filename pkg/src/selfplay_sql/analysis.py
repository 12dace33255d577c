"""Corpus statistics: interaction lengths, difficulty mix, repetition and templates."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BindError, CorpusError, SqlSyntaxError
from .evaluator import WITHOUT_VALUES, Difficulty, difficulty, evaluate_corpus
from .interaction import Interaction
from .selfplay.orchestrator import detect_repetition
from .sql import parse_sql
from .templates import TemplateBank, abstract_to_template, template_overlap

FORMATS = ("json", "markdown", "csv")
CSV_TABLES = ("difficulty", "length", "repetition", "templates")


@dataclass
class CorpusReport:
    length_histogram: dict[int, int]
    mean_length: float
    difficulty_distribution: dict[str, float]
    repetition_by_length: dict[int, float]
    template_top_k: list[tuple[str, float]]
    overlap_with: float | None = None
    n_interactions: int = 0
    n_turns: int = 0
    skipped_turns: int = 0  # synthetic turns whose SQL never parsed
    difficulty_counts: dict[str, int] = field(default_factory=dict)

    def to_json(self):
        return {
            "length_histogram": {str(k): v for k, v in sorted(self.length_histogram.items())},
            "mean_length": self.mean_length,
            "difficulty_distribution": dict(self.difficulty_distribution),
            "difficulty_counts": dict(self.difficulty_counts),
            "repetition_by_length": {str(k): v for k, v in sorted(self.repetition_by_length.items())},
            "template_top_k": [[k, p] for k, p in self.template_top_k],
            "overlap_with": self.overlap_with,
            "n_interactions": self.n_interactions,
            "n_turns": self.n_turns,
            "skipped_turns": self.skipped_turns,
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            length_histogram={int(k): v for k, v in obj["length_histogram"].items()},
            mean_length=obj["mean_length"],
            difficulty_distribution=dict(obj["difficulty_distribution"]),
            repetition_by_length={int(k): v for k, v in obj["repetition_by_length"].items()},
            template_top_k=[(k, p) for k, p in obj["template_top_k"]],
            overlap_with=obj.get("overlap_with"),
            n_interactions=obj.get("n_interactions", 0),
            n_turns=obj.get("n_turns", 0),
            skipped_turns=obj.get("skipped_turns", 0),
            difficulty_counts=dict(obj.get("difficulty_counts", {})),
        )


def corpus_report(corpus: list[Interaction], schemas, reference_bank: TemplateBank | None = None,
                  top_k: int = 10) -> CorpusReport:
    """Aggregate statistics over ``corpus``.

    Turns flagged ``sql_valid=False`` are left out of the per-query statistics; any
    other parse failure raises :class:`CorpusError` with its coordinates.
    """
    lengths = Counter(len(i.turns) for i in corpus)
    repeated = Counter(len(i.turns) for i in corpus if detect_repetition(i))
    diff = Counter()
    bank = TemplateBank()
    skipped = 0
    for i, inter in enumerate(corpus):
        schema = schemas[inter.db_id]
        for t, turn in enumerate(inter.turns):
            if not turn.sql_valid:
                skipped += 1
                continue
            try:
                ast = parse_sql(turn.sql, schema)
            except (SqlSyntaxError, BindError) as exc:
                raise CorpusError(i, t, exc) from exc
            diff[difficulty(ast).value] += 1
            bank.add(abstract_to_template(ast, schema))
    n = len(corpus)
    n_queries = sum(diff.values())
    return CorpusReport(
        length_histogram=dict(sorted(lengths.items())),
        mean_length=sum(k * v for k, v in lengths.items()) / n if n else 0.0,
        difficulty_distribution={d.value: (diff[d.value] / n_queries if n_queries else 0.0) for d in Difficulty},
        repetition_by_length={k: repeated[k] / v for k, v in sorted(lengths.items())},
        template_top_k=bank.top(top_k),
        overlap_with=None if reference_bank is None else template_overlap(bank, reference_bank),
        n_interactions=n,
        n_turns=sum(len(i.turns) for i in corpus),
        skipped_turns=skipped,
        difficulty_counts={d.value: diff[d.value] for d in Difficulty},
    )


def qm_by_turn(preds, golds, schemas, mode: str = WITHOUT_VALUES) -> dict[int, float]:
    """Question match at each turn index, over interactions long enough to reach it."""
    return evaluate_corpus(golds, preds, schemas, mode).per_turn_qm


# rendering ----------------------------------------------------------------

def _rows(report: CorpusReport, table: str):
    if table == "difficulty":
        return ["difficulty", "count", "proportion"], [
            [d.value, report.difficulty_counts.get(d.value, 0), report.difficulty_distribution.get(d.value, 0.0)]
            for d in Difficulty]
    if table == "length":
        total = report.n_interactions or 1
        return ["length", "count", "proportion"], [
            [k, v, v / total] for k, v in sorted(report.length_histogram.items())]
    if table == "repetition":
        return ["length", "repetition_proportion"], [
            [k, v] for k, v in sorted(report.repetition_by_length.items())]
    if table == "templates":
        return ["rank", "template", "proportion"], [
            [r, k, p] for r, (k, p) in enumerate(report.template_top_k, 1)]
    raise ValueError(f"unknown table {table!r}; choose from {', '.join(CSV_TABLES)}")


def _fmt(v):
    return f"{v:.4f}" if isinstance(v, float) else str(v)


def _markdown(report: CorpusReport) -> str:
    out = ["# Corpus report", "",
           f"- interactions: {report.n_interactions}",
           f"- turns: {report.n_turns}",
           f"- mean interaction length: {report.mean_length:.4f}"]
    if report.overlap_with is not None:
        out.append(f"- template overlap with reference: {report.overlap_with:.4f}")
    if report.skipped_turns:
        out.append(f"- turns without parseable SQL: {report.skipped_turns}")
    titles = {"length": "Interaction lengths", "difficulty": "Difficulty",
              "repetition": "Repetition by length", "templates": "Top templates"}
    for table in ("length", "difficulty", "repetition", "templates"):
        header, rows = _rows(report, table)
        out += ["", f"## {titles[table]}", "",
                "| " + " | ".join(header) + " |",
                "|" + "---|" * len(header)]
        for r in rows:
            cells = [f"`{c}`" if table == "templates" and j == 1 else _fmt(c) for j, c in enumerate(r)]
            out.append("| " + " | ".join(cells) + " |")
    return "\n".join(out) + "\n"


def render_report(report: CorpusReport, fmt: str = "json", table: str = "difficulty") -> str:
    if fmt == "json":
        return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
    if fmt == "markdown":
        return _markdown(report)
    if fmt == "csv":
        header, rows = _rows(report, table)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")


def emit_report(report: CorpusReport, fmt: str = "json", path=None, table: str = "difficulty") -> str:
    """Render ``report`` and, when ``path`` is given, write it there. Returns the text."""
    text = render_report(report, fmt, table)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    return text
