"""Self-play orchestration and agent transports."""

from ..interaction import Goal, Interaction, Turn
from .agents import (
    GOAL_DIRECTIVE, HttpSqlToText, HttpTextToSql, ScriptedSqlToText, ScriptedTextToSql, make_agent,
)
from .orchestrator import (
    STOP_SYMBOL, GenerationStats, SelfPlayConfig, detect_repetition, dumps_jsonl, generate_corpus,
    run_interaction, write_jsonl,
)

__all__ = [
    "GOAL_DIRECTIVE", "STOP_SYMBOL", "GenerationStats", "Goal", "HttpSqlToText", "HttpTextToSql",
    "Interaction", "ScriptedSqlToText", "ScriptedTextToSql", "SelfPlayConfig", "Turn",
    "detect_repetition", "dumps_jsonl", "generate_corpus", "make_agent", "run_interaction", "write_jsonl",
]
