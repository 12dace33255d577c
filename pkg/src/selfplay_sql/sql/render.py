"""Canonical lower-case SQL rendering of bound syntax trees."""

from __future__ import annotations

from .ast import (
    Agg, BinOp, BoolOp, Column, Comparison, DerivedTable, Literal, Not, QueryAst, Subquery, TableRef,
)

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def _quote(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def render_expr(e) -> str:
    if isinstance(e, Column):
        if e.table is None:
            return e.name
        return f"{e.table}.{e.name}"
    if isinstance(e, Literal):
        return _quote(e.value) if e.kind == "string" else e.value
    if isinstance(e, Agg):
        inner = render_expr(e.arg)
        return f"{e.func}({'distinct ' if e.distinct else ''}{inner})"
    if isinstance(e, BinOp):
        def side(child, right):
            text = render_expr(child)
            if isinstance(child, BinOp) and (
                _PRECEDENCE[child.op] < _PRECEDENCE[e.op] or (right and _PRECEDENCE[child.op] == _PRECEDENCE[e.op])
            ):
                return f"({text})"
            return text
        return f"{side(e.left, False)} {e.op} {side(e.right, True)}"
    if isinstance(e, Subquery):
        return f"({render_sql(e.query)})"
    raise TypeError(f"cannot render {type(e).__name__}")


def render_condition(c) -> str:
    if isinstance(c, Comparison):
        left = render_expr(c.left)
        if c.op in ("between", "not between"):
            return f"{left} {c.op} {render_expr(c.right)} and {render_expr(c.upper)}"
        return f"{left} {c.op} {render_expr(c.right)}"
    if isinstance(c, BoolOp):
        parts = []
        for item in c.items:
            text = render_condition(item)
            if isinstance(item, BoolOp):
                text = f"({text})"
            parts.append(text)
        return f" {c.op} ".join(parts)
    if isinstance(c, Not):
        text = render_condition(c.item)
        if isinstance(c.item, BoolOp):
            text = f"({text})"
        return f"not {text}"
    raise TypeError(f"cannot render {type(c).__name__}")


def _render_source(src) -> str:
    if isinstance(src, TableRef):
        return src.name
    if isinstance(src, DerivedTable):
        return f"({render_sql(src.query)})"
    raise TypeError(f"cannot render {type(src).__name__}")


def render_sql(q: QueryAst) -> str:
    parts = ["select"]
    if q.distinct:
        parts.append("distinct")
    parts.append(", ".join(render_expr(e) for e in q.select))
    parts.append("from " + " join ".join(_render_source(s) for s in q.from_.sources))
    if q.from_.conditions:
        conds = []
        for c in q.from_.conditions:
            text = render_condition(c)
            conds.append(f"({text})" if isinstance(c, BoolOp) else text)
        parts.append("on " + " and ".join(conds))
    if q.where is not None:
        parts.append("where " + render_condition(q.where))
    if q.group_by:
        parts.append("group by " + ", ".join(render_expr(c) for c in q.group_by))
    if q.having is not None:
        parts.append("having " + render_condition(q.having))
    if q.order_by:
        parts.append("order by " + ", ".join(f"{render_expr(i.expr)} {i.direction}" for i in q.order_by))
    if q.limit is not None:
        parts.append(f"limit {q.limit}")
    if q.set_op is not None:
        parts.append(f"{q.set_op.op} {render_sql(q.set_op.query)}")
    return " ".join(parts)
