import json

import pytest

from selfplay_sql.dataset import (
    EXPORT_FILES, SQL_TO_TEXT, TASKS, TEXT_TO_SQL, export_training_sets, load_interactions,
    to_sql2text_examples, to_text2sql_examples,
)
from selfplay_sql.errors import FormatError
from selfplay_sql.interaction import Goal, Interaction, Turn
from selfplay_sql.schema import serialize_schema
from selfplay_sql.selfplay import write_jsonl
from selfplay_sql.sql import decompose, parse_sql

from conftest import DATA


def test_load_gold(gold):
    assert len(gold) == 5
    assert sum(len(i.turns) for i in gold) == 13
    assert gold[0].db_id == "gas_company"
    assert gold[0].utterances[0] == "Show the location for all gas stations."
    assert not gold[0].synthetic


def test_missing_query_field(tmp_path):
    raw = json.loads((DATA / "gold_interactions.json").read_text())
    del raw[3]["interaction"][1]["query"]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(raw))
    with pytest.raises(FormatError, match="interaction 3, turn 1"):
        load_interactions(p)


def test_unknown_database(tmp_path, schemas):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps([{"database_id": "nowhere", "interaction": [{"utterance": "a", "query": "b"}]}]))
    with pytest.raises(FormatError, match="interaction 0"):
        load_interactions(p, schemas)


def test_synthetic_jsonl_round_trip(tmp_path, gold):
    synthetic = [Interaction(i.db_id, i.turns, Goal(i.db_id, i.turns[-1].sql, "k"), 1.0) for i in gold]
    p = tmp_path / "syn.jsonl"
    write_jsonl(synthetic, p)
    back = load_interactions(p)
    assert back == synthetic and all(i.synthetic for i in back)


def test_text2sql_single_turn(schemas):
    inter = Interaction("poker_player", (Turn("List all names.", "select name from people"),))
    (ex,) = to_text2sql_examples(inter, schemas["poker_player"])
    assert ex.input == "List all names. | " + serialize_schema(schemas["poker_player"])
    assert ex.target == "select name from people" and ex.task == TEXT_TO_SQL and ex.origin == "gold"


def test_text2sql_context_most_recent_first(gold, schemas):
    inter = gold[0]
    exs = to_text2sql_examples(inter, schemas["gas_company"])
    assert len(exs) == 3
    lengths = [len(e.input) for e in exs]
    assert lengths == sorted(set(lengths))
    assert exs[2].input == (
        "Order them by assets in descending order. | For each of them, also show the company names. | "
        "Show the location for all gas stations. | gas_company | company : company_id, rank, company, headquarters,"
        " main_industry, sales_billion, profits_billion, assets_billion, market_value | gas_station : station_id,"
        " open_year, location, manager_name, vice_manager_name, representative_name | station_company :"
        " station_id, company_id, rank_of_the_year")
    assert exs[2].target == inter.turns[2].sql


def test_sql2text_format(gold, schemas):
    inter = gold[0]
    schema_text = serialize_schema(schemas["gas_company"])
    exs = to_sql2text_examples(inter, schemas["gas_company"])
    goal = inter.turns[-1].sql
    assert exs[0].input == f"{goal} |  |  | {schema_text}"
    assert exs[1].input == f"{goal} | Show the location for all gas stations. | select location from gas_station" \
                           f" | {schema_text}"
    assert exs[2].input.startswith(f"{goal} | Show the location for all gas stations. For each of them,")
    assert exs[0].target == inter.turns[0].utterance
    assert exs[-1].target == inter.turns[-1].utterance + " <stop>"
    assert all(e.task == SQL_TO_TEXT for e in exs)


def test_delimiter_never_inside_segments(schemas):
    inter = Interaction("poker_player", (Turn("names | heights?", "select name from people"),
                                         Turn("tallest", "select name from people order by height desc")))
    for ex in to_text2sql_examples(inter, schemas["poker_player"]):
        assert ex.input.split(" | ")[0] in ("names / heights?", "tallest")


def test_serialization_injective_and_targets_parse(gold, schemas):
    inputs = set()
    for inter in gold:
        s = schemas[inter.db_id]
        for ex, turn in zip(to_text2sql_examples(inter, s), inter.turns):
            assert ex.input not in inputs
            inputs.add(ex.input)
            assert decompose(parse_sql(ex.target, s)) == decompose(parse_sql(turn.sql, s))
        for ex in to_sql2text_examples(inter, s):
            assert ex.input not in inputs
            inputs.add(ex.input)


def _synthetic(gold, n):
    out = []
    for i in gold[:n]:
        out.append(Interaction(i.db_id, i.turns, Goal(i.db_id, i.turns[-1].sql, "k"), 1.0))
    return out


def test_export_counts(tmp_path, gold, schemas):
    gold10 = gold + gold
    synthetic = _synthetic(gold, 4)
    manifest = export_training_sets(gold10, synthetic, tmp_path, schemas)
    gold_turns = sum(len(i.turns) for i in gold10)
    syn_turns = sum(len(i.turns) for i in synthetic)
    for task in TASKS:
        counts = manifest["tasks"][task]
        assert counts == {"synthetic_pretrain": syn_turns, "gold_finetune": gold_turns,
                          "combined": syn_turns + gold_turns}
        for name, expected in zip(EXPORT_FILES, (syn_turns, gold_turns, syn_turns + gold_turns)):
            lines = (tmp_path / task / name).read_text(encoding="utf-8").splitlines()
            assert len(lines) == expected
            for line in lines:
                assert set(json.loads(line)) == {"input", "target", "task", "origin"}
    assert not manifest["synthetic_empty"]
    assert json.loads((tmp_path / "manifest.json").read_text()) == manifest


def test_export_empty_synthetic(tmp_path, gold, schemas):
    manifest = export_training_sets(gold, [], tmp_path, schemas)
    assert manifest["synthetic_empty"]
    assert (tmp_path / TEXT_TO_SQL / "synthetic_pretrain.jsonl").read_bytes() == b""


def test_export_deterministic(tmp_path, gold, schemas):
    m1 = export_training_sets(gold, _synthetic(gold, 2), tmp_path / "a", schemas)
    m2 = export_training_sets(gold, _synthetic(gold, 2), tmp_path / "b", schemas)
    assert m1 == m2
    for path in sorted((tmp_path / "a").rglob("*")):
        if path.is_file():
            assert path.read_bytes() == (tmp_path / "b" / path.relative_to(tmp_path / "a")).read_bytes()
    m3 = export_training_sets(gold, _synthetic(gold, 3), tmp_path / "c", schemas)
    assert m3["config_hash"] != m1["config_hash"]
