import csv
import io
import json

import pytest
from hypothesis import given, settings, strategies as st

from selfplay_sql.analysis import CorpusReport, corpus_report, emit_report, qm_by_turn
from selfplay_sql.cli import read_predictions
from selfplay_sql.errors import CorpusError, LengthMismatch
from selfplay_sql.evaluator import evaluate_corpus
from selfplay_sql.interaction import Interaction, Turn
from selfplay_sql.templates import extract_bank

from conftest import DATA

QUERIES = ["select name from people", "select height from people", "select nationality from people",
           "select count(*) from people", "select name from people where height > 190"]


def _inter(n, repeat=False):
    turns = [Turn(f"question {i}", QUERIES[i % len(QUERIES)]) for i in range(n)]
    if repeat:
        turns[-1] = Turn("Question 0 ", turns[-1].sql)
    return Interaction("poker_player", tuple(turns))


def test_lengths_and_mean(schemas):
    report = corpus_report([_inter(2), _inter(2), _inter(3), _inter(5)], schemas)
    assert report.length_histogram == {2: 2, 3: 1, 5: 1}
    assert report.mean_length == 3.0
    assert report.overlap_with is None


def test_repetition_by_length(schemas):
    corpus = [_inter(3, repeat=True), _inter(3, repeat=True), _inter(2), _inter(4), _inter(4, repeat=True)]
    report = corpus_report(corpus, schemas)
    assert report.repetition_by_length == {2: 0.0, 3: 1.0, 4: 0.5}


def test_gold_fixture_report(gold, schemas):
    bank = extract_bank(gold, schemas)
    report = corpus_report(gold, schemas, reference_bank=bank, top_k=3)
    assert report.mean_length == 13 / 5
    assert report.difficulty_counts == {"easy": 7, "medium": 4, "hard": 2, "extra_hard": 0}
    assert sum(report.difficulty_distribution.values()) == pytest.approx(1.0, abs=1e-9)
    assert report.overlap_with == 1.0
    assert report.template_top_k[0] == ("select text_col_0", 3 / 13)


def test_parse_errors_carry_coordinates(schemas):
    corpus = [_inter(2), Interaction("poker_player", (Turn("a", "select name from people"), Turn("b", "select x")))]
    with pytest.raises(CorpusError) as info:
        corpus_report(corpus, schemas)
    assert (info.value.interaction_index, info.value.turn_index) == (1, 1)


def test_invalid_synthetic_turns_skipped(schemas):
    corpus = [Interaction("poker_player", (Turn("a", "select x", False), Turn("b", "select name from people")))]
    report = corpus_report(corpus, schemas)
    assert report.skipped_turns == 1 and report.difficulty_counts["easy"] == 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 6), st.booleans()), min_size=1, max_size=12))
def test_report_invariants(schemas, shape):
    corpus = [_inter(n, repeat=r and n > 1) for n, r in shape]
    report = corpus_report(corpus, schemas)
    assert sum(report.length_histogram.values()) == len(corpus)
    weighted = sum(k * v for k, v in report.length_histogram.items()) / len(corpus)
    assert abs(report.mean_length - weighted) < 1e-9
    assert abs(sum(report.difficulty_distribution.values()) - 1) < 1e-9
    assert all(0 <= p <= 1 for p in report.repetition_by_length.values())


# QM by turn ------------------------------------------------------------------------------

def test_qm_by_turn_all_correct(gold, schemas):
    preds = [[t.sql for t in i.turns] for i in gold]
    per_turn = qm_by_turn(preds, gold, schemas)
    assert per_turn == {1: 1.0, 2: 1.0, 3: 1.0}


def test_qm_by_turn_dip_at_turn_two(gold, schemas):
    preds = [[t.sql for t in i.turns] for i in gold]
    for i, p in enumerate(preds):
        p[1] = gold[i].turns[0].sql
    assert qm_by_turn(preds, gold, schemas) == {1: 1.0, 2: 0.0, 3: 1.0}


def test_qm_by_turn_hand_scored(gold, schemas):
    preds = read_predictions(DATA / "gold_predictions.txt")
    per_turn = qm_by_turn(preds, gold, schemas)
    assert per_turn == {1: 5 / 5, 2: 4 / 5, 3: 0 / 3}
    counts = {1: 5, 2: 5, 3: 3}
    weighted = sum(per_turn[t] * counts[t] for t in per_turn) / 13
    assert weighted == pytest.approx(evaluate_corpus(gold, preds, schemas).qm)
    with pytest.raises(LengthMismatch):
        qm_by_turn(preds[:2], gold, schemas)


# emitting ----------------------------------------------------------------------------------

def test_emit_is_deterministic_and_json_round_trips(gold, schemas, tmp_path):
    report = corpus_report(gold, schemas, reference_bank=extract_bank(gold, schemas))
    for fmt in ("json", "markdown", "csv"):
        a = emit_report(report, fmt, tmp_path / f"a.{fmt}")
        b = emit_report(report, fmt, tmp_path / f"b.{fmt}")
        assert a == b
        assert (tmp_path / f"a.{fmt}").read_bytes() == (tmp_path / f"b.{fmt}").read_bytes()
    assert CorpusReport.from_json(json.loads(emit_report(report, "json"))) == report


def test_csv_difficulty_table(gold, schemas):
    rows = list(csv.reader(io.StringIO(emit_report(corpus_report(gold, schemas), "csv"))))
    assert rows[0] == ["difficulty", "count", "proportion"]
    assert [r[0] for r in rows[1:]] == ["easy", "medium", "hard", "extra_hard"]


def test_markdown_has_tables(gold, schemas):
    md = emit_report(corpus_report(gold, schemas), "markdown")
    for title in ("## Interaction lengths", "## Difficulty", "## Repetition by length", "## Top templates"):
        assert title in md
    assert "| 3 | 3 | 0.6000 |" in md


def test_unknown_format(gold, schemas):
    with pytest.raises(ValueError):
        emit_report(corpus_report(gold, schemas), "xml")
