"""Recursive-descent parser and schema binder for the Spider SQL subset.

The parser is deterministic and never backtracks, which is what lets
:mod:`selfplay_sql.guard` reuse it on incomplete input: a syntax error raised
at a token that was actually read cannot be repaired by appending text.
"""

from __future__ import annotations

import difflib
from dataclasses import replace

from ..errors import BindError, IncompleteInput, SqlSyntaxError
from ..schema import Schema
from .ast import (
    AGGREGATES, COMPARISON_OPS, SET_OPS, Agg, BinOp, BoolOp, Column, Comparison,
    DerivedTable, FromClause, Literal, Not, OrderItem, QueryAst, SetOp, Subquery, TableRef,
)
from .tokenizer import KEYWORDS, Token, tokenize


class Parser:
    def __init__(self, tokens: list[Token], partial: bool = False, text_len: int = 0):
        self.tokens = tokens
        self.pos = 0
        self.partial = partial
        self.text_len = text_len
        # (token, role) for identifiers whose role is settled: table | column | qualifier | alias
        self.roles: list[tuple[Token, str]] = []

    # token stream -------------------------------------------------------
    def peek(self, k: int = 0) -> Token:
        i = self.pos + k
        if i < len(self.tokens):
            return self.tokens[i]
        if self.partial:
            raise IncompleteInput("input ends here", self.text_len)
        return Token("eof", "", self.text_len, self.text_len)

    def next(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def error(self, expected, tok=None):
        tok = tok or self.peek()
        found = tok.value or "end of input"
        raise SqlSyntaxError(f"unexpected {found!r}", tok.start, expected)

    def expect_word(self, word):
        tok = self.peek()
        if not tok.is_word(word):
            self.error([word], tok)
        return self.next()

    def expect_punct(self, p):
        tok = self.peek()
        if not tok.is_punct(p):
            self.error([p], tok)
        return self.next()

    def identifier(self, role):
        tok = self.peek()
        if tok.kind != "word" or tok.value in KEYWORDS:
            self.error(["identifier"], tok)
        self.next()
        self.roles.append((tok, role))
        return tok

    # statements ---------------------------------------------------------
    def parse_statement(self) -> QueryAst:
        q = self.parse_query()
        if self.peek().is_punct(";"):
            self.next()
        tok = self.peek()
        if tok.kind != "eof":
            self.error(["end of input"], tok)
        return q

    def parse_query(self) -> QueryAst:
        q = self.parse_select_core()
        tok = self.peek()
        if tok.is_word(*SET_OPS):
            self.next()
            q = replace(q, set_op=SetOp(tok.value, self.parse_query()))
        return q

    def parse_select_core(self) -> QueryAst:
        self.expect_word("select")
        distinct = False
        if self.peek().is_word("distinct"):
            self.next()
            distinct = True
        items = [self.parse_expr()]
        while self.peek().is_punct(","):
            self.next()
            items.append(self.parse_expr())
        self.expect_word("from")
        from_ = self.parse_from()
        where = group_by = having = order_by = limit = None
        if self.peek().is_word("where"):
            self.next()
            where = self.parse_condition()
        if self.peek().is_word("group"):
            self.next()
            self.expect_word("by")
            group_by = [self.parse_column_ref()]
            while self.peek().is_punct(","):
                self.next()
                group_by.append(self.parse_column_ref())
        if self.peek().is_word("having"):
            self.next()
            having = self.parse_condition()
        if self.peek().is_word("order"):
            self.next()
            self.expect_word("by")
            order_by = [self.parse_order_item()]
            while self.peek().is_punct(","):
                self.next()
                order_by.append(self.parse_order_item())
        if self.peek().is_word("limit"):
            self.next()
            tok = self.peek()
            if tok.kind != "number" or not tok.value.isdigit():
                self.error(["integer"], tok)
            self.next()
            limit = int(tok.value)
        return QueryAst(
            select=tuple(items), from_=from_, distinct=distinct, where=where,
            group_by=tuple(group_by or ()), having=having, order_by=tuple(order_by or ()),
            limit=limit,
        )

    def parse_order_item(self) -> OrderItem:
        expr = self.parse_expr()
        direction = "asc"
        if self.peek().is_word("asc", "desc"):
            direction = self.next().value
        return OrderItem(expr, direction)

    def parse_from(self) -> FromClause:
        sources = [self.parse_source()]
        conditions = []
        while True:
            tok = self.peek()
            if tok.is_word("join", "inner"):
                if tok.value == "inner":
                    self.next()
                self.expect_word("join")
                sources.append(self.parse_source())
                if self.peek().is_word("on"):
                    self.next()
                    cond = self.parse_condition()
                    if isinstance(cond, BoolOp) and cond.op == "and":
                        conditions.extend(cond.items)
                    else:
                        conditions.append(cond)
            elif tok.is_punct(","):
                self.next()
                sources.append(self.parse_source())
            else:
                break
        return FromClause(tuple(sources), tuple(conditions))

    def parse_source(self):
        if self.peek().is_punct("("):
            self.next()
            q = self.parse_query()
            self.expect_punct(")")
            return DerivedTable(q, self.parse_alias())
        tok = self.identifier("table")
        return TableRef(tok.value, self.parse_alias(), (tok.start, tok.end))

    def parse_alias(self):
        tok = self.peek()
        if tok.is_word("as"):
            self.next()
            return self.identifier("alias").value
        if tok.kind == "word" and tok.value not in KEYWORDS:
            return self.identifier("alias").value
        return None

    # expressions --------------------------------------------------------
    def parse_expr(self):
        left = self.parse_term()
        while self.peek().is_op("+", "-"):
            op = self.next().value
            left = BinOp(op, left, self.parse_term())
        return left

    def parse_term(self):
        left = self.parse_primary()
        while self.peek().is_op("*", "/"):
            op = self.next().value
            left = BinOp(op, left, self.parse_primary())
        return left

    def parse_primary(self):
        tok = self.peek()
        if tok.is_punct("("):
            if self.peek(1).is_word("select"):
                self.next()
                q = self.parse_query()
                self.expect_punct(")")
                return Subquery(q)
            self.next()
            e = self.parse_expr()
            self.expect_punct(")")
            return e
        if tok.is_op("*"):
            self.next()
            return Column(None, "*", (tok.start, tok.end))
        if tok.kind == "number":
            self.next()
            return Literal(tok.value, "number")
        if tok.is_op("-") and self.peek(1).kind == "number":
            self.next()
            return Literal("-" + self.next().value, "number")
        if tok.kind == "string":
            self.next()
            return Literal(tok.value, "string")
        if tok.is_word("null"):
            self.next()
            return Literal("null", "null")
        if tok.kind == "word" and tok.value in AGGREGATES and self.peek(1).is_punct("("):
            self.next()
            self.next()
            distinct = False
            if self.peek().is_word("distinct"):
                self.next()
                distinct = True
            arg = self.parse_expr()
            self.expect_punct(")")
            return Agg(tok.value, arg, distinct)
        if tok.kind == "word" and tok.value not in KEYWORDS:
            return self.parse_column_ref()
        self.error(["expression"], tok)

    def parse_column_ref(self) -> Column:
        tok = self.peek()
        if tok.is_op("*"):
            self.next()
            return Column(None, "*", (tok.start, tok.end))
        if tok.kind != "word" or tok.value in KEYWORDS:
            self.error(["column"], tok)
        if self.peek(1).is_punct("."):
            qualifier = self.identifier("qualifier")
            self.next()
            star = self.peek()
            if star.is_op("*"):
                self.next()
                return Column(qualifier.value, "*", (qualifier.start, star.end))
            col = self.identifier("column")
            return Column(qualifier.value, col.value, (qualifier.start, col.end))
        col = self.identifier("column")
        return Column(None, col.value, (col.start, col.end))

    # conditions ---------------------------------------------------------
    def parse_condition(self):
        items = [self.parse_conjunction()]
        while self.peek().is_word("or"):
            self.next()
            items.append(self.parse_conjunction())
        return items[0] if len(items) == 1 else BoolOp("or", tuple(items))

    def parse_conjunction(self):
        items = [self.parse_negation()]
        while self.peek().is_word("and"):
            self.next()
            items.append(self.parse_negation())
        return items[0] if len(items) == 1 else BoolOp("and", tuple(items))

    def parse_negation(self):
        tok = self.peek()
        if tok.is_word("not"):
            self.next()
            return Not(self.parse_negation())
        if tok.is_punct("(") and not self.peek(1).is_word("select"):
            self.next()
            cond = self.parse_condition()
            self.expect_punct(")")
            return cond
        return self.parse_predicate()

    def parse_predicate(self):
        left = self.parse_expr()
        tok = self.peek()
        negated = False
        if tok.is_word("not"):
            self.next()
            negated = True
            tok = self.peek()
            if not tok.is_word("in", "like", "between"):
                self.error(["in", "like", "between"], tok)
        prefix = "not " if negated else ""
        if tok.is_word("in"):
            self.next()
            lparen = self.peek()
            if not (lparen.is_punct("(") and self.peek(1).is_word("select")):
                self.error(["(select"], lparen)
            return Comparison(prefix + "in", left, self.parse_primary())
        if tok.is_word("like"):
            self.next()
            return Comparison(prefix + "like", left, self.parse_expr())
        if tok.is_word("between"):
            self.next()
            lo = self.parse_expr()
            self.expect_word("and")
            return Comparison(prefix + "between", left, lo, self.parse_expr())
        if tok.is_word("is"):
            self.next()
            op = "is"
            if self.peek().is_word("not"):
                self.next()
                op = "is not"
            self.expect_word("null")
            return Comparison(op, left, Literal("null", "null"))
        if tok.is_op(*COMPARISON_OPS):
            self.next()
            return Comparison(tok.value, left, self.parse_expr())
        self.error(["comparison operator"], tok)


# binding ------------------------------------------------------------------

class _Scope:
    def __init__(self, schema: Schema, sources, parent=None):
        self.schema = schema
        self.sources = sources  # bound TableRef / DerivedTable, aliases kept for lookup
        self.parent = parent

    def _derived_output(self, derived: DerivedTable, name: str):
        for item in derived.query.select:
            if isinstance(item, Column) and item.name == name:
                return item
        return None

    def _derived_tables(self, derived: DerivedTable):
        return {s.name for s in derived.query.from_.sources if isinstance(s, TableRef)}

    def resolve(self, col: Column) -> Column:
        if col.table is None and col.is_star:
            return col
        scope = self
        while scope is not None:
            hit = scope._resolve_local(col)
            if hit is not None:
                return hit
            scope = scope.parent
        return self._fail(col)

    def _resolve_local(self, col: Column):
        schema = self.schema
        if col.table is not None:
            q = col.table
            for src in self.sources:
                if isinstance(src, TableRef) and q in (src.alias, src.name):
                    if col.is_star or schema.table(src.name).column(col.name):
                        return Column(src.name, col.name, col.span)
                    raise BindError(f"table {src.name!r} has no column {col.name!r}",
                                    self._candidates(col.name, [src.name]), col.span)
                if isinstance(src, DerivedTable) and q == src.alias:
                    hit = self._derived_output(src, col.name)
                    if hit is None:
                        raise BindError(f"derived table {q!r} has no column {col.name!r}", (), col.span)
                    return hit
            for src in self.sources:
                if isinstance(src, DerivedTable) and q in self._derived_tables(src):
                    table = schema.table(q)
                    if col.is_star or table.column(col.name):
                        return Column(q, col.name, col.span)
            return None
        for src in self.sources:
            if isinstance(src, TableRef) and schema.table(src.name).column(col.name):
                return Column(src.name, col.name, col.span)
            if isinstance(src, DerivedTable):
                hit = self._derived_output(src, col.name)
                if hit is not None:
                    return hit
        return None

    def _candidates(self, name, tables=None):
        pool = set()
        for t in self.schema.tables:
            if tables is None or t.name in tables:
                pool.update(c.name for c in t.columns)
        return difflib.get_close_matches(name, sorted(pool), n=3)

    def _fail(self, col: Column):
        if col.table is not None:
            known = self.schema.table(col.table) is not None
            scope = self
            aliases = set()
            while scope is not None:
                for s in scope.sources:
                    aliases.add(s.alias)
                    if isinstance(s, TableRef):
                        aliases.add(s.name)
                scope = scope.parent
            if col.table not in aliases:
                what = "table not in from clause" if known else "unknown table or alias"
                raise BindError(f"{what}: {col.table!r}",
                                difflib.get_close_matches(col.table, sorted(a for a in aliases if a)), col.span,
                                "scope" if known else "unknown_identifier")
        if col.table is None and col.name in self.schema.column_index:
            tables = ", ".join(self.schema.column_index[col.name])
            raise BindError(f"column {col.name!r} belongs to {tables}, which is not in the from clause",
                            (), col.span, "scope")
        raise BindError(f"unknown column {col.name!r}", self._candidates(col.name), col.span)


def _bind_expr(e, scope: _Scope):
    if isinstance(e, Column):
        return scope.resolve(e)
    if isinstance(e, Agg):
        return Agg(e.func, _bind_expr(e.arg, scope), e.distinct)
    if isinstance(e, BinOp):
        return BinOp(e.op, _bind_expr(e.left, scope), _bind_expr(e.right, scope))
    if isinstance(e, Subquery):
        return Subquery(_bind_query(e.query, scope.schema, scope))
    return e


def _bind_cond(c, scope: _Scope):
    if c is None:
        return None
    if isinstance(c, Comparison):
        return Comparison(
            c.op, _bind_expr(c.left, scope),
            None if c.right is None else _bind_expr(c.right, scope),
            None if c.upper is None else _bind_expr(c.upper, scope),
        )
    if isinstance(c, BoolOp):
        return BoolOp(c.op, tuple(_bind_cond(i, scope) for i in c.items))
    return Not(_bind_cond(c.item, scope))


def _bind_query(q: QueryAst, schema: Schema, parent: _Scope | None) -> QueryAst:
    sources = []
    for src in q.from_.sources:
        if isinstance(src, TableRef):
            if schema.table(src.name) is None:
                raise BindError(f"unknown table {src.name!r}",
                                difflib.get_close_matches(src.name, schema.table_names, n=3), src.span)
            sources.append(src)
        else:
            sources.append(DerivedTable(_bind_query(src.query, schema, parent), src.alias))
    scope = _Scope(schema, sources, parent)
    from_ = FromClause(
        tuple(TableRef(s.name, span=s.span) if isinstance(s, TableRef) else DerivedTable(s.query)
              for s in sources),
        tuple(_bind_cond(c, scope) for c in q.from_.conditions),
    )
    return QueryAst(
        select=tuple(_bind_expr(e, scope) for e in q.select),
        from_=from_,
        distinct=q.distinct,
        where=_bind_cond(q.where, scope),
        group_by=tuple(scope.resolve(c) for c in q.group_by),
        having=_bind_cond(q.having, scope),
        order_by=tuple(OrderItem(_bind_expr(i.expr, scope), i.direction) for i in q.order_by),
        limit=q.limit,
        set_op=None if q.set_op is None else SetOp(q.set_op.op, _bind_query(q.set_op.query, schema, parent)),
    )


def parse_syntax(text: str) -> QueryAst:
    """Parse without binding; column tables hold raw qualifiers or ``None``."""
    return Parser(tokenize(text), text_len=len(text)).parse_statement()


def parse_sql(text: str, schema: Schema) -> QueryAst:
    """Parse ``text`` and resolve every identifier against ``schema``.

    Raises :class:`SqlSyntaxError` or :class:`BindError`.
    """
    return _bind_query(parse_syntax(text), schema, None)
