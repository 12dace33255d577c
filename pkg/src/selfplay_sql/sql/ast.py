"""Clause-structured SQL syntax tree for the Spider query subset.

After binding, every :class:`Column` carries the real (lower-case) table name;
aliases never survive parsing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

AGGREGATES = ("max", "min", "count", "sum", "avg")
SET_OPS = ("intersect", "union", "except")
COMPARISON_OPS = ("=", "!=", "<", ">", "<=", ">=")


@dataclass(frozen=True)
class Column:
    table: str | None
    name: str
    span: tuple[int, int] | None = field(default=None, compare=False, repr=False)

    @property
    def is_star(self):
        return self.name == "*"


@dataclass(frozen=True)
class Literal:
    value: str
    kind: str  # "number" | "string" | "null"


@dataclass(frozen=True)
class Agg:
    func: str
    arg: "Expr"
    distinct: bool = False


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Subquery:
    query: "QueryAst"


@dataclass(frozen=True)
class Slot:
    """Typed column placeholder inside a template skeleton."""

    col_type: str
    index: int
    node: int

    @property
    def label(self):
        return f"{self.col_type}_col_{self.index}"


@dataclass(frozen=True)
class ValueSlot:
    pass


Expr = Union[Column, Literal, Agg, BinOp, Subquery, Slot, ValueSlot]


@dataclass(frozen=True)
class Comparison:
    op: str
    left: Expr
    right: Expr | None = None
    upper: Expr | None = None  # second operand of between


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    items: tuple


@dataclass(frozen=True)
class Not:
    item: "Condition"


Condition = Union[Comparison, BoolOp, Not]


@dataclass(frozen=True)
class TableRef:
    name: str
    alias: str | None = field(default=None, compare=False)
    span: tuple[int, int] | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class DerivedTable:
    query: "QueryAst"
    alias: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class TableNode:
    """Table placeholder inside a template skeleton."""

    index: int


@dataclass(frozen=True)
class FromClause:
    sources: tuple
    conditions: tuple = ()


@dataclass(frozen=True)
class OrderItem:
    expr: Expr
    direction: str = "asc"


@dataclass(frozen=True)
class SetOp:
    op: str
    query: "QueryAst"


@dataclass(frozen=True)
class QueryAst:
    select: tuple
    from_: FromClause
    distinct: bool = False
    where: Condition | None = None
    group_by: tuple = ()
    having: Condition | None = None
    order_by: tuple = ()
    limit: object = None  # int, or ValueSlot in skeletons
    set_op: SetOp | None = None


def conjuncts(cond):
    if cond is None:
        return ()
    if isinstance(cond, BoolOp) and cond.op == "and":
        out = []
        for item in cond.items:
            out.extend(conjuncts(item))
        return tuple(out)
    return (cond,)


def expr_children(e):
    if isinstance(e, Agg):
        return (e.arg,)
    if isinstance(e, BinOp):
        return (e.left, e.right)
    return ()


def walk_expr(e):
    """Yield ``e`` and its sub-expressions; does not enter subqueries."""
    yield e
    for child in expr_children(e):
        yield from walk_expr(child)


def cond_exprs(cond):
    """Top-level expressions appearing in a condition tree."""
    if cond is None:
        return
    if isinstance(cond, Comparison):
        for e in (cond.left, cond.right, cond.upper):
            if e is not None:
                yield e
    elif isinstance(cond, BoolOp):
        for item in cond.items:
            yield from cond_exprs(item)
    elif isinstance(cond, Not):
        yield from cond_exprs(cond.item)


def cond_comparisons(cond):
    if cond is None:
        return
    if isinstance(cond, Comparison):
        yield cond
    elif isinstance(cond, BoolOp):
        for item in cond.items:
            yield from cond_comparisons(item)
    elif isinstance(cond, Not):
        yield from cond_comparisons(cond.item)


def scope_exprs(q: QueryAst):
    """Every top-level expression that belongs to ``q``'s own scope, in clause order."""
    yield from q.select
    for c in q.from_.conditions:
        yield from cond_exprs(c)
    yield from cond_exprs(q.where)
    yield from q.group_by
    yield from cond_exprs(q.having)
    for item in q.order_by:
        yield item.expr


def subqueries(q: QueryAst):
    """Directly nested queries: derived tables and subqueries in conditions (not set ops)."""
    for src in q.from_.sources:
        if isinstance(src, DerivedTable):
            yield src.query
    for e in scope_exprs(q):
        for sub in walk_expr(e):
            if isinstance(sub, Subquery):
                yield sub.query


def iter_queries(q: QueryAst):
    """``q`` and every query nested in it, including set-operation operands."""
    yield q
    for sub in subqueries(q):
        yield from iter_queries(sub)
    if q.set_op is not None:
        yield from iter_queries(q.set_op.query)


def iter_columns(q: QueryAst):
    for query in iter_queries(q):
        for e in scope_exprs(query):
            for sub in walk_expr(e):
                if isinstance(sub, Column):
                    yield sub
