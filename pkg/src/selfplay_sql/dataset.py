"""Corpus loading, seq2seq serialization and training-set export."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import FormatError
from .interaction import Interaction, Turn
from .schema import DELIMITER, Schema, serialize_schema

STOP_SYMBOL = "<stop>"
TEXT_TO_SQL = "text_to_sql"
SQL_TO_TEXT = "sql_to_text"
TASKS = (TEXT_TO_SQL, SQL_TO_TEXT)
EXPORT_FILES = ("synthetic_pretrain.jsonl", "gold_finetune.jsonl", "combined.jsonl")


@dataclass(frozen=True)
class Seq2SeqExample:
    input: str
    target: str
    task: str
    origin: str  # gold | synthetic

    def to_json(self):
        return asdict(self)


# loading ------------------------------------------------------------------

def _gold_interaction(obj, i: int) -> Interaction:
    if not isinstance(obj, dict):
        raise FormatError(f"interaction {i}: expected an object")
    db_id = obj.get("database_id", obj.get("db_id"))
    turns = obj.get("interaction")
    if not isinstance(db_id, str) or not isinstance(turns, list):
        raise FormatError(f"interaction {i}: needs 'database_id' and an 'interaction' list")
    out = []
    for t, turn in enumerate(turns):
        if not isinstance(turn, dict) or not isinstance(turn.get("utterance"), str) \
                or not isinstance(turn.get("query"), str):
            raise FormatError(f"interaction {i}, turn {t}: needs string 'utterance' and 'query'")
        out.append(Turn(turn["utterance"], turn["query"]))
    if not out:
        raise FormatError(f"interaction {i}: no turns")
    return Interaction(db_id.lower(), tuple(out))


def _synthetic_interaction(obj, i: int) -> Interaction:
    try:
        inter = Interaction.from_json(obj)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"interaction {i}: malformed record ({exc})") from exc
    if not inter.turns:
        raise FormatError(f"interaction {i}: no turns")
    return inter


def load_interactions(path, schemas=None) -> list[Interaction]:
    """Read a SParC/CoSQL JSON file or a JSONL file of interaction records.

    With ``schemas`` given, every db id must be present in the collection.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        out = []
        for i, line in enumerate(l for l in text.splitlines() if l.strip()):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"interaction {i}: invalid JSON ({exc.msg})") from exc
            out.append(_synthetic_interaction(obj, i) if "turns" in obj else _gold_interaction(obj, i))
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc.msg})") from exc
        if not isinstance(raw, list):
            raise FormatError(f"{path}: expected a list of interactions")
        out = [_gold_interaction(obj, i) for i, obj in enumerate(raw)]
    if schemas is not None:
        for i, inter in enumerate(out):
            if inter.db_id not in schemas:
                raise FormatError(f"interaction {i}: unknown database {inter.db_id!r}")
    return out


# serialization ------------------------------------------------------------

def _segment(text: str) -> str:
    # keep segment boundaries unambiguous
    return " ".join(text.replace("|", "/").split())


def _join(*segments) -> str:
    return DELIMITER.join(segments)


def to_text2sql_examples(interaction: Interaction, schema: Schema, origin: str = "gold") -> list[Seq2SeqExample]:
    """``U_t | U_{t-1} | ... | U_1 | schema`` -> ``Q_t`` for every turn."""
    schema_text = serialize_schema(schema)
    utts = [_segment(u) for u in interaction.utterances]
    out = []
    for t, turn in enumerate(interaction.turns):
        history = utts[t::-1]
        out.append(Seq2SeqExample(_join(*history, schema_text), turn.sql, TEXT_TO_SQL, origin))
    return out


def to_sql2text_examples(interaction: Interaction, schema: Schema, origin: str = "gold",
                         stop_symbol: str = STOP_SYMBOL) -> list[Seq2SeqExample]:
    """``G | U_1 ... U_{t-1} | Q_{t-1} | schema`` -> ``U_t``; the last target ends with the stop symbol.

    G is the final turn's SQL. Previous utterances share one segment, so turn 1 has
    two empty segments.
    """
    schema_text = serialize_schema(schema)
    goal = _segment(interaction.turns[-1].sql)
    utts = [_segment(u) for u in interaction.utterances]
    out = []
    last = len(interaction.turns) - 1
    for t, turn in enumerate(interaction.turns):
        prev_utts = " ".join(utts[:t])
        prev_sql = _segment(interaction.turns[t - 1].sql) if t else ""
        target = turn.utterance if t < last else f"{turn.utterance} {stop_symbol}"
        out.append(Seq2SeqExample(_join(goal, prev_utts, prev_sql, schema_text), target, SQL_TO_TEXT, origin))
    return out


_SERIALIZERS = {TEXT_TO_SQL: to_text2sql_examples, SQL_TO_TEXT: to_sql2text_examples}


def serialize_corpus(corpus, schemas, task: str, origin: str) -> list[Seq2SeqExample]:
    fn = _SERIALIZERS[task]
    return [ex for inter in corpus for ex in fn(inter, schemas[inter.db_id], origin)]


# export -------------------------------------------------------------------

def _jsonl(examples) -> bytes:
    lines = (json.dumps(e.to_json(), sort_keys=True, ensure_ascii=False) + "\n" for e in examples)
    return "".join(lines).encode("utf-8")


def export_training_sets(gold, synthetic, out_dir, schemas) -> dict:
    """Write per-task pretrain (synthetic), finetune (gold) and combined JSONL files.

    Layout: ``out_dir/{task}/{synthetic_pretrain,gold_finetune,combined}.jsonl`` plus
    ``out_dir/manifest.json``. Output bytes depend only on the inputs.
    """
    out_dir = Path(out_dir)
    manifest = {"tasks": {}, "synthetic_empty": not synthetic,
                "gold_interactions": len(gold), "synthetic_interactions": len(synthetic)}
    digests = {}
    for task in TASKS:
        syn = serialize_corpus(synthetic, schemas, task, "synthetic")
        gld = serialize_corpus(gold, schemas, task, "gold")
        task_dir = out_dir / task
        task_dir.mkdir(parents=True, exist_ok=True)
        for name, examples in zip(EXPORT_FILES, (syn, gld, syn + gld)):
            data = _jsonl(examples)
            (task_dir / name).write_bytes(data)
            digests[f"{task}/{name}"] = hashlib.sha256(data).hexdigest()
        manifest["tasks"][task] = {"synthetic_pretrain": len(syn), "gold_finetune": len(gld),
                                   "combined": len(syn) + len(gld)}
    config = {"delimiter": DELIMITER, "stop_symbol": STOP_SYMBOL, "files": digests}
    manifest["config_hash"] = hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
    return manifest
