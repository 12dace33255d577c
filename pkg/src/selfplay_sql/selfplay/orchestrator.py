"""Goal-conditioned self-play between a text-to-SQL agent and a user simulator."""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from ..errors import (
    AgentProtocolError, AgentUnreachable, BindError, DegenerateInteraction, FillFailure,
    NoCompatibleTemplate, SqlSyntaxError,
)
from ..dataset import STOP_SYMBOL
from ..evaluator import filtering_score
from ..interaction import Goal, Interaction, Turn
from ..schema import Schema, serialize_schema
from ..sql import parse_sql
from ..templates import GoalSampler

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelfPlayConfig:
    max_turns: int = 5
    threshold_w: float = 0.5
    target_count: int = 100_000
    seed: int = 0
    stop_symbol: str = STOP_SYMBOL
    workers: int = 1
    include_empty: bool = False  # average over substructures empty in both queries too

    def __post_init__(self):
        if not 0.0 <= self.threshold_w <= 1.0:
            raise ValueError("threshold_w must lie in [0, 1]")
        if self.max_turns < 1:
            raise ValueError("max_turns must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class GenerationStats:
    attempted: int = 0
    generated: int = 0
    kept: int = 0
    degenerate: int = 0
    skipped: int = 0  # no goal could be sampled
    failed: int = 0  # agent errors
    length_histogram: dict = field(default_factory=dict)
    kept_length_histogram: dict = field(default_factory=dict)
    repetitions: int = 0
    kept_repetitions: int = 0

    @property
    def kept_fraction(self) -> float:
        return self.kept / self.attempted if self.attempted else 0.0

    def to_json(self):
        out = asdict(self)
        out["length_histogram"] = {str(k): v for k, v in sorted(self.length_histogram.items())}
        out["kept_length_histogram"] = {str(k): v for k, v in sorted(self.kept_length_histogram.items())}
        out["kept_fraction"] = self.kept_fraction
        return out


def _normalize_utterance(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip().lower()


def detect_repetition(interaction: Interaction) -> bool:
    """True when two user utterances coincide up to whitespace and case."""
    seen = set()
    for u in interaction.utterances:
        norm = _normalize_utterance(u)
        if norm in seen:
            return True
        seen.add(norm)
    return False


def _split_stop(utterance: str, stop: bool, symbol: str) -> tuple[str, bool]:
    text = utterance.strip()
    if symbol and text.endswith(symbol):
        text = text[: -len(symbol)].rstrip()
        stop = True
    return text, stop


def run_interaction(goal: Goal, schema: Schema, t2s, s2t, cfg: SelfPlayConfig) -> Interaction:
    """Alternate user simulator and parser turns until the stop symbol or ``max_turns``.

    A response consisting only of the stop symbol ends the interaction without adding
    a turn; stopping before the first turn raises :class:`DegenerateInteraction`.
    """
    schema_text = serialize_schema(schema)
    goal_ast = goal.query if goal.query is not None else parse_sql(goal.sql, schema)
    context: list[str] = []
    prev_sql = ""
    turns: list[Turn] = []
    stopped = False
    for t in range(1, cfg.max_turns + 1):
        utterance, stop = s2t.sql_to_text(goal.sql, prev_sql, list(context), schema_text, goal=goal, turn=t)
        utterance, stop = _split_stop(utterance, stop, cfg.stop_symbol)
        if not utterance:
            if stop:
                stopped = True
                break
            raise AgentProtocolError(f"empty utterance at turn {t}")
        sql = t2s.text_to_sql(utterance, list(context), schema_text, goal=goal, turn=t)
        try:
            parse_sql(sql, schema)
            valid = True
        except (SqlSyntaxError, BindError):
            valid = False
        turns.append(Turn(utterance, sql, valid))
        if stop:
            stopped = True
            break
        context.append(utterance)
        prev_sql = sql
    if not turns:
        raise DegenerateInteraction(f"goal {goal.sql!r}: simulator stopped before the first turn")
    final = turns[-1]
    score = 0.0
    if final.sql_valid:
        score = filtering_score(parse_sql(final.sql, schema), goal_ast, cfg.include_empty)
    return Interaction(goal.db_id, tuple(turns), goal, score, stopped)


def _run_one(args):
    goal, schema, t2s, s2t, cfg = args
    try:
        return run_interaction(goal, schema, t2s, s2t, cfg), None
    except DegenerateInteraction as exc:
        return None, ("degenerate", exc)
    except (AgentUnreachable, AgentProtocolError) as exc:
        return None, ("failed", exc)


def generate_corpus(bank, schemas, contents, t2s, s2t, cfg: SelfPlayConfig, goals=None):
    """Sample ``cfg.target_count`` goals, play them out and keep those with score > w.

    ``goals``, when given, replaces sampling (e.g. goals produced by ``sample-goals``).
    Returns ``(kept, stats)``; the output is deterministic for scripted agents.
    """
    stats = GenerationStats()
    planned: list[Goal | None] = []
    if goals is None:
        sampler = GoalSampler(bank, schemas, contents, cfg.seed)
        for _ in range(cfg.target_count):
            try:
                planned.append(sampler.sample())
            except (NoCompatibleTemplate, FillFailure) as exc:
                log.warning("goal sampling skipped: %s", exc)
                planned.append(None)
    else:
        planned = list(goals)[: cfg.target_count]
    stats.attempted = len(planned)

    jobs = [(g, schemas[g.db_id], t2s, s2t, cfg) for g in planned if g is not None]
    stats.skipped = len(planned) - len(jobs)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    kept = []
    lengths, kept_lengths = Counter(), Counter()
    for inter, err in results:
        if err is not None:
            kind, exc = err
            log.warning("interaction %s: %s", kind, exc)
            if kind == "degenerate":
                stats.degenerate += 1
            else:
                stats.failed += 1
            continue
        stats.generated += 1
        lengths[len(inter.turns)] += 1
        repeated = detect_repetition(inter)
        stats.repetitions += repeated
        if inter.final_score > cfg.threshold_w:
            kept.append(inter)
            kept_lengths[len(inter.turns)] += 1
            stats.kept_repetitions += repeated
    stats.kept = len(kept)
    stats.length_histogram = dict(sorted(lengths.items()))
    stats.kept_length_histogram = dict(sorted(kept_lengths.items()))
    return kept, stats


def dumps_jsonl(interactions) -> str:
    return "".join(json.dumps(i.to_json(), sort_keys=True, ensure_ascii=False) + "\n" for i in interactions)


def write_jsonl(interactions, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_jsonl(interactions))
