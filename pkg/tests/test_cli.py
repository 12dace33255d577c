import json
import subprocess
import sys

import pytest

from selfplay_sql import __version__
from selfplay_sql.cli import main
from selfplay_sql.selfplay import GOAL_DIRECTIVE

from conftest import DATA

TABLES = str(DATA / "tables.json")
GOLD = str(DATA / "gold_interactions.json")
CONTENT = str(DATA / "content")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_evaluate(capsys):
    code, out, _ = run(capsys, "evaluate", "--tables", TABLES, "--gold", GOLD,
                       "--pred", str(DATA / "gold_predictions.txt"))
    assert code == 0
    scores = json.loads(out)
    assert scores["qm"] == pytest.approx(9 / 13) and scores["im"] == pytest.approx(1 / 5)


def test_evaluate_length_mismatch(capsys, tmp_path):
    pred = tmp_path / "p.txt"
    pred.write_text("select 1\n")
    code, _, err = run(capsys, "evaluate", "--tables", TABLES, "--gold", GOLD, "--pred", str(pred))
    assert code == 2 and err.startswith("error:")


def test_sample_goals_then_self_play(capsys, tmp_path):
    goals = tmp_path / "goals.jsonl"
    code, _, _ = run(capsys, "sample-goals", "--tables", TABLES, "--train", GOLD, "--content-dir", CONTENT,
                     "--count", "5", "--seed", "3", "--db", "poker_player", "--out", str(goals))
    assert code == 0
    rows = [json.loads(line) for line in goals.read_text().splitlines()]
    assert len(rows) == 5 and all(r["db_id"] == "poker_player" for r in rows)

    t2s = tmp_path / "t2s.json"
    s2t = tmp_path / "s2t.json"
    t2s.write_text(json.dumps([{"turn": 1, "sql": GOAL_DIRECTIVE}]))
    s2t.write_text(json.dumps([{"turn": 1, "utterance": "Answer the goal.", "stop": True}]))
    corpus, stats = tmp_path / "syn.jsonl", tmp_path / "stats.json"
    code, _, _ = run(capsys, "self-play", "--tables", TABLES, "--goals", str(goals), "--t2s-playbook", str(t2s),
                     "--s2t-playbook", str(s2t), "--target-count", "5", "--out", str(corpus), "--stats", str(stats))
    assert code == 0
    assert len(corpus.read_text().splitlines()) == 5
    assert json.loads(stats.read_text())["kept"] == 5

    code, out, _ = run(capsys, "stats", "--tables", TABLES, "--corpus", str(corpus), "--reference", GOLD)
    assert code == 0 and json.loads(out)["length_histogram"] == {"1": 5}

    out_dir = tmp_path / "export"
    code, out, _ = run(capsys, "export", "--tables", TABLES, "--gold", GOLD, "--synthetic", str(corpus),
                       "--out-dir", str(out_dir))
    manifest = json.loads(out)
    assert code == 0 and manifest["tasks"]["text_to_sql"]["combined"] == 18
    assert (out_dir / "sql_to_text" / "combined.jsonl").exists()


def test_self_play_from_train(capsys, tmp_path):
    t2s = tmp_path / "t2s.json"
    s2t = tmp_path / "s2t.json"
    t2s.write_text(json.dumps([{"turn": 1, "sql": GOAL_DIRECTIVE}]))
    s2t.write_text(json.dumps([{"turn": 1, "utterance": "Go.", "stop": True}]))
    outs = []
    for n in range(2):
        out = tmp_path / f"run{n}.jsonl"
        code, _, _ = run(capsys, "self-play", "--tables", TABLES, "--train", GOLD, "--content-dir", CONTENT,
                         "--t2s-playbook", str(t2s), "--s2t-playbook", str(s2t), "--target-count", "8",
                         "--seed", "4", "--workers", "2", "--out", str(out))
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] and len(outs[0].splitlines()) == 8


def test_self_play_needs_goal_source(capsys, tmp_path):
    pb = tmp_path / "pb.json"
    pb.write_text("[]")
    code, _, err = run(capsys, "self-play", "--tables", TABLES, "--t2s-playbook", str(pb),
                       "--s2t-playbook", str(pb), "--out", str(tmp_path / "x.jsonl"))
    assert code == 2 and "--goals" in err


def test_validate(capsys, tmp_path):
    sql = tmp_path / "q.sql"
    sql.write_text("select name from people\n\nselect nme from people\n")
    code, out, _ = run(capsys, "validate", "--tables", TABLES, "--db", "poker_player", "--sql", str(sql))
    report = json.loads(out)
    assert code == 1 and report["invalid"] == 1
    assert report["queries"][1]["line"] == 3
    assert report["queries"][1]["violations"][0]["kind"] == "unknown_identifier"


@pytest.mark.parametrize("fmt,marker", [("json", '"mean_length"'), ("markdown", "# Corpus report"),
                                        ("csv", "difficulty,count,proportion")])
def test_stats_formats(capsys, tmp_path, fmt, marker):
    target = tmp_path / f"r.{fmt}"
    code, out, _ = run(capsys, "stats", "--tables", TABLES, "--corpus", GOLD, "--format", fmt)
    assert code == 0 and marker in out
    run(capsys, "stats", "--tables", TABLES, "--corpus", GOLD, "--format", fmt, "--out", str(target))
    assert target.read_text() == out


def test_stats_csv_templates_table(capsys):
    _, out, _ = run(capsys, "stats", "--tables", TABLES, "--corpus", GOLD, "--format", "csv",
                    "--table", "templates", "--top-k", "2")
    assert out.splitlines()[0] == "rank,template,proportion" and len(out.splitlines()) == 3


def test_recall_at_k(capsys, tmp_path):
    beams = tmp_path / "beams.jsonl"
    recs = [{"gold": "select name from people", "beams": ["select name from people"], "db_id": "poker_player"},
            {"gold": "select count(*) from people",
             "beams": ["select name from people", "select count(*) from people"]},
            {"gold": "select height from people", "beams": ["select name from people"]}]
    beams.write_text("".join(json.dumps(r) + "\n" for r in recs))
    code, out, _ = run(capsys, "recall-at-k", "--tables", TABLES, "--beams", str(beams), "--k", "1", "2",
                       "--db", "poker_player")
    assert code == 0
    assert json.loads(out) == {"1": pytest.approx(1 / 3), "2": pytest.approx(2 / 3)}


def test_recall_unknown_db(capsys, tmp_path):
    beams = tmp_path / "beams.jsonl"
    beams.write_text(json.dumps({"gold": "select 1", "beams": []}) + "\n")
    code, _, err = run(capsys, "recall-at-k", "--tables", TABLES, "--beams", str(beams))
    assert code == 2 and "record 0" in err


def test_module_version():
    res = subprocess.run([sys.executable, "-m", "selfplay_sql", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == __version__
