"""Schema-aware validity checks for whole queries and coarse checks for SQL prefixes."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BindError, IncompleteInput, SqlSyntaxError
from .schema import Schema
from .sql import parse_sql
from .sql.ast import (
    Agg, BinOp, Column, Comparison, DerivedTable, Literal, QueryAst, Subquery, TableRef,
    cond_comparisons, walk_expr,
)
from .sql.parser import Parser
from .sql.tokenizer import KEYWORDS, tokenize

VIOLATION_KINDS = ("syntax", "unknown_identifier", "scope", "type_mismatch", "join_unrealizable",
                   "aggregate_misuse")

_ORDERING_OPS = {"<", ">", "<=", ">=", "between", "not between"}


@dataclass(frozen=True)
class Violation:
    kind: str
    location: tuple[int, int]
    message: str

    def to_json(self):
        return {"kind": self.kind, "location": list(self.location), "message": self.message}


def _loc(node):
    span = getattr(node, "span", None)
    if span is not None:
        return span
    try:
        inner = [x.span for x in walk_expr(node) if getattr(x, "span", None) is not None]
    except TypeError:
        inner = []
    return inner[0] if inner else (0, 0)


def _is_numeric_text(value: str) -> bool:
    try:
        float(value)
    except ValueError:
        return False
    return True


class _Validator:
    def __init__(self, schema: Schema):
        self.schema = schema
        self.out: list[Violation] = []

    def add(self, kind, node, message):
        self.out.append(Violation(kind, _loc(node), message))

    def visible_tables(self, q: QueryAst) -> set[str]:
        tables = set()
        for src in q.from_.sources:
            if isinstance(src, TableRef):
                tables.add(src.name)
            elif isinstance(src, DerivedTable):
                tables |= self.visible_tables(src.query)
        return tables

    def col_type(self, e):
        if isinstance(e, Column) and not e.is_star:
            return self.schema.column_type(e.table, e.name)
        if isinstance(e, Agg):
            if e.func == "count":
                return "number"
            if e.func in ("sum", "avg"):
                return "number"
            return self.col_type(e.arg)
        if isinstance(e, BinOp):
            return "number"
        return None

    def check_query(self, q: QueryAst, outer: set[str]):
        for src in q.from_.sources:
            if isinstance(src, TableRef) and self.schema.table(src.name) is None:
                self.add("unknown_identifier", src, f"unknown table {src.name!r}")
            elif isinstance(src, DerivedTable):
                self.check_query(src.query, outer)
        scope = self.visible_tables(q) | outer

        for e in q.select:
            self.check_expr(e, scope)
        for item in q.order_by:
            self.check_expr(item.expr, scope)
        for c in q.group_by:
            self.check_expr(c, scope)
            if isinstance(c, Agg):
                self.add("aggregate_misuse", c, "aggregate in group by")
        for cond in q.from_.conditions:
            self.check_condition(cond, scope, allow_agg=False, clause="join condition")
            self.check_join(cond)
        self.check_condition(q.where, scope, allow_agg=False, clause="where")
        if q.having is not None and not q.group_by:
            self.add("aggregate_misuse", Column(None, "having"), "having without group by")
        self.check_condition(q.having, scope, allow_agg=True, clause="having")
        if q.set_op is not None:
            self.check_query(q.set_op.query, outer)

    def check_expr(self, e, scope, in_agg=False):
        if isinstance(e, Column):
            if e.is_star:
                if e.table is not None and e.table not in scope:
                    self.add("scope", e, f"{e.table}.* used outside its from clause")
                return
            table = self.schema.table(e.table) if e.table else None
            if table is None or table.column(e.name) is None:
                self.add("unknown_identifier", e, f"unknown column {e.table}.{e.name}")
            elif e.table not in scope:
                self.add("scope", e, f"column {e.table}.{e.name} is not in scope")
        elif isinstance(e, Agg):
            if in_agg:
                self.add("aggregate_misuse", e, "nested aggregate")
            if e.func in ("sum", "avg"):
                t = self.col_type(e.arg)
                if t in ("text", "boolean"):
                    self.add("type_mismatch", e.arg, f"{e.func} over a {t} column")
            self.check_expr(e.arg, scope, in_agg=True)
        elif isinstance(e, BinOp):
            for side in (e.left, e.right):
                t = self.col_type(side)
                if t in ("text", "boolean"):
                    self.add("type_mismatch", side, f"arithmetic on a {t} column")
                self.check_expr(side, scope, in_agg)
        elif isinstance(e, Subquery):
            self.check_query(e.query, scope)

    def check_condition(self, cond, scope, allow_agg, clause):
        for cmp in cond_comparisons(cond):
            for e in (cmp.left, cmp.right, cmp.upper):
                if e is None:
                    continue
                self.check_expr(e, scope)
                if not allow_agg and any(isinstance(x, Agg) for x in walk_expr(e)):
                    self.add("aggregate_misuse", e, f"aggregate in {clause}")
            self.check_types(cmp)

    def check_types(self, cmp: Comparison):
        t = self.col_type(cmp.left)
        if t is None:
            return
        for e in (cmp.right, cmp.upper):
            if not isinstance(e, Literal) or e.kind == "null":
                continue
            if t == "text" and e.kind == "number":
                self.add("type_mismatch", cmp.left, f"text column compared with number {e.value}")
            elif t == "number" and e.kind == "string" and not _is_numeric_text(e.value) \
                    and cmp.op not in ("like", "not like"):
                self.add("type_mismatch", cmp.left, f"number column compared with string {e.value!r}")
        if cmp.op in _ORDERING_OPS and t == "boolean":
            self.add("type_mismatch", cmp.left, "ordering comparison on a boolean column")
        if cmp.op in ("like", "not like") and t not in ("text", "others", "time", "key"):
            self.add("type_mismatch", cmp.left, f"like on a {t} column")

    def check_join(self, cond):
        if not (isinstance(cond, Comparison) and cond.op == "="):
            return
        a, b = cond.left, cond.right
        if not (isinstance(a, Column) and isinstance(b, Column)) or a.is_star or b.is_star:
            return
        if self.schema.table(a.table) is None or self.schema.table(b.table) is None:
            return
        if not self.schema.has_fk((a.table, a.name), (b.table, b.name)):
            self.add("join_unrealizable", a,
                     f"{a.table}.{a.name} = {b.table}.{b.name} is not a foreign-key edge")


def validate_query(ast: QueryAst, schema: Schema) -> list[Violation]:
    """Return every violation found in ``ast``; an empty list means the query is valid."""
    v = _Validator(schema)
    v.check_query(ast, set())
    return v.out


def validate_sql(text: str, schema: Schema) -> list[Violation]:
    """Text-level variant: syntax and binding failures become violations too."""
    try:
        ast = parse_sql(text, schema)
    except IncompleteInput as exc:
        return [Violation("syntax", (len(text), len(text)), str(exc))]
    except SqlSyntaxError as exc:
        pos = exc.position if exc.position is not None else 0
        return [Violation("syntax", (pos, min(pos + 1, len(text))), str(exc))]
    except BindError as exc:
        return [Violation(exc.kind, exc.span or (0, 0), str(exc))]
    return validate_query(ast, schema)


# prefixes -----------------------------------------------------------------

@dataclass(frozen=True)
class PrefixStatus:
    state: str  # admissible | inadmissible | complete
    violation: Violation | None = None


ADMISSIBLE = PrefixStatus("admissible")
COMPLETE = PrefixStatus("complete")

# a trailing token of these kinds may still grow when more characters arrive
_GROWABLE = {"word", "number", "op"}


def _open_without(tokens, text_len) -> bool:
    """Whether ``tokens`` parse up to their end, so a lookahead error belongs to the next word."""
    try:
        Parser(tokens, partial=True, text_len=text_len).parse_statement()
    except IncompleteInput:
        return True
    except SqlSyntaxError:
        return False
    return True


def check_prefix(prefix: str, schema: Schema) -> PrefixStatus:
    """Classify a prefix of a SQL query.

    ``complete`` when the prefix is itself a valid query; ``inadmissible`` only when
    no continuation can parse, bind and validate; ``admissible`` otherwise. A word
    touching the end of the prefix may still grow, so it only needs to be the start
    of a known name or keyword.
    """
    try:
        if not validate_sql(prefix, schema):
            return COMPLETE
    except RecursionError:
        pass
    try:
        tokens = tokenize(prefix, partial=True)
    except SqlSyntaxError as exc:
        pos = exc.position or 0
        return PrefixStatus("inadmissible", Violation("syntax", (pos, pos + 1), str(exc)))
    if tokens and not tokens[-1].complete:
        tokens = tokens[:-1]
    growing = tokens[-1] if tokens and tokens[-1].kind in _GROWABLE and tokens[-1].end == len(prefix) else None

    parser = Parser(tokens, partial=True, text_len=len(prefix))
    syntax = None
    try:
        parser.parse_statement()
    except IncompleteInput:
        pass
    except SqlSyntaxError as exc:
        pos = exc.position if exc.position is not None else 0
        if growing is None or (pos < growing.start and not _open_without(tokens[:-1], len(prefix))):
            syntax = Violation("syntax", (pos, min(pos + 1, len(prefix))), str(exc))

    names = {"table": set(schema.table_names), "column": set(schema.column_index)}
    for tok, role in parser.roles:
        if role not in names:
            continue
        known = names[role]
        if tok is growing:
            ok = any(n.startswith(tok.value) for n in known) or any(k.startswith(tok.value) for k in KEYWORDS)
        else:
            ok = tok.value in known
        if not ok:
            return PrefixStatus("inadmissible", Violation(
                "unknown_identifier", (tok.start, tok.end), f"unknown {role} {tok.value!r}"))
    if syntax is not None:
        return PrefixStatus("inadmissible", syntax)
    return ADMISSIBLE
