"""Interaction records shared by the dataset, self-play and analysis code."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Turn:
    utterance: str
    sql: str
    sql_valid: bool = True  # False when the text-to-SQL output failed to parse


@dataclass(frozen=True)
class Goal:
    db_id: str
    sql: str
    template_key: str
    query: object = field(default=None, compare=False, repr=False)

    def to_json(self):
        return {"db_id": self.db_id, "sql": self.sql, "template": self.template_key}


@dataclass(frozen=True)
class Interaction:
    db_id: str
    turns: tuple[Turn, ...]
    goal: Goal | None = None
    final_score: float | None = None
    stopped: bool = True  # False when max_turns ran out before the stop symbol

    @property
    def utterances(self):
        return [t.utterance for t in self.turns]

    @property
    def queries(self):
        return [t.sql for t in self.turns]

    @property
    def synthetic(self):
        return self.goal is not None

    def to_json(self):
        out = {
            "db_id": self.db_id,
            "turns": [{"utterance": t.utterance, "sql": t.sql, "sql_valid": t.sql_valid} for t in self.turns],
        }
        if self.goal is not None:
            out["goal"] = self.goal.to_json()
            out["final_score"] = self.final_score
            out["stopped"] = self.stopped
        return out

    @classmethod
    def from_json(cls, obj):
        goal = obj.get("goal")
        return cls(
            db_id=obj["db_id"],
            turns=tuple(Turn(t["utterance"], t["sql"], t.get("sql_valid", True)) for t in obj["turns"]),
            goal=None if goal is None else Goal(goal["db_id"], goal["sql"], goal["template"]),
            final_score=obj.get("final_score"),
            stopped=obj.get("stopped", True),
        )
