"""SQL parsing, rendering and clause decomposition."""

from .ast import QueryAst
from .decompose import ClauseSets, decompose, normalize_condition, without_values
from .parser import parse_sql, parse_syntax
from .render import render_sql

__all__ = [
    "ClauseSets", "QueryAst", "decompose", "normalize_condition", "parse_sql", "parse_syntax",
    "render_sql", "without_values",
]
