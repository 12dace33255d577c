"""Order-insensitive clause sets used for exact set match.

Canonical elements are nested tuples of strings: ``('col', 't.c')``,
``('val', kind, text)``, ``('agg', func, distinct, arg)``, ``('op', op, l, r)``,
``('sub',)`` for a nested query (its own clause sets go to ``nested``),
``('cmp', op, left, right[, upper])``, ``('and'|'or', items)``, ``('not', item)``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .ast import (
    Agg, BinOp, BoolOp, Column, Comparison, DerivedTable, Literal, Not, QueryAst, Subquery, TableRef,
)

_MIRROR = {"=": "=", "!=": "!=", "<": ">", ">": "<", "<=": ">=", ">=": "<="}
VALUE_PLACEHOLDER = "_"


@dataclass(frozen=True)
class ClauseSets:
    select: tuple = ()
    from_: tuple = ()
    where: tuple = ()
    group_by: tuple = ()
    having: tuple = ()
    order_by: tuple = ()
    limit: str | None = None
    set_op: tuple | None = None
    nested: tuple = ()


def _canon_number(text: str) -> str:
    try:
        value = float(text)
    except ValueError:
        return text
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _is_value(e) -> bool:
    return isinstance(e, (Literal, Subquery))


def normalize_condition(c):
    """Flatten and/or chains, orient comparisons as (column, op, value) and sort operands.

    The result is a fixed point: ``normalize_condition`` applied twice changes nothing.
    """
    if isinstance(c, Comparison):
        if c.op in _MIRROR and _is_value(c.left) and not _is_value(c.right):
            return Comparison(_MIRROR[c.op], c.right, c.left)
        if c.op in ("=", "!=") and not _is_value(c.left) and not _is_value(c.right):
            a, b = sorted((c.left, c.right), key=lambda e: repr(canon_expr(e, [])))
            return Comparison(c.op, a, b)
        return c
    if isinstance(c, BoolOp):
        items = []
        for item in c.items:
            item = normalize_condition(item)
            if isinstance(item, BoolOp) and item.op == c.op:
                items.extend(item.items)
            else:
                items.append(item)
        if len(items) == 1:
            return items[0]
        items.sort(key=lambda i: repr(canon_condition(i, [])))
        return BoolOp(c.op, tuple(items))
    if isinstance(c, Not):
        return Not(normalize_condition(c.item))
    return c


def canon_expr(e, subs: list):
    if isinstance(e, Column):
        return ("col", e.name if e.table is None else f"{e.table}.{e.name}")
    if isinstance(e, Literal):
        value = _canon_number(e.value) if e.kind == "number" else e.value
        return ("val", e.kind, value)
    if isinstance(e, Agg):
        return ("agg", e.func, "distinct" if e.distinct else "", canon_expr(e.arg, subs))
    if isinstance(e, BinOp):
        return ("op", e.op, canon_expr(e.left, subs), canon_expr(e.right, subs))
    if isinstance(e, Subquery):
        subs.append(decompose(e.query))
        return ("sub",)
    raise TypeError(f"cannot canonicalize {type(e).__name__}")


def canon_condition(c, subs: list):
    if isinstance(c, Comparison):
        out = ("cmp", c.op, canon_expr(c.left, subs), canon_expr(c.right, subs))
        if c.upper is not None:
            out += (canon_expr(c.upper, subs),)
        return out
    if isinstance(c, BoolOp):
        return (c.op, tuple(canon_condition(i, subs) for i in c.items))
    if isinstance(c, Not):
        return ("not", canon_condition(c.item, subs))
    raise TypeError(f"cannot canonicalize {type(c).__name__}")


def _sorted(items) -> tuple:
    return tuple(sorted(items, key=repr))


def _condition_set(cond, subs) -> tuple:
    if cond is None:
        return ()
    cond = normalize_condition(cond)
    items = cond.items if isinstance(cond, BoolOp) and cond.op == "and" else (cond,)
    return _sorted(canon_condition(i, subs) for i in items)


def decompose(q: QueryAst) -> ClauseSets:
    subs: list[ClauseSets] = []
    select = [canon_expr(e, subs) for e in q.select]
    if q.distinct:
        select.append(("distinct",))

    from_ = []
    for src in q.from_.sources:
        if isinstance(src, TableRef):
            from_.append(("table", src.name))
        elif isinstance(src, DerivedTable):
            subs.append(decompose(src.query))
            from_.append(("table", "<subquery>"))
    for cond in q.from_.conditions:
        cond = normalize_condition(cond)
        if (isinstance(cond, Comparison) and cond.op == "="
                and isinstance(cond.left, Column) and isinstance(cond.right, Column)):
            from_.append(("join",) + tuple(sorted((canon_expr(cond.left, subs)[1], canon_expr(cond.right, subs)[1]))))
        else:
            from_.append(("on", canon_condition(cond, subs)))

    where = _condition_set(q.where, subs)
    having = _condition_set(q.having, subs)
    order_by = _sorted((canon_expr(i.expr, subs), i.direction) for i in q.order_by)
    return ClauseSets(
        select=_sorted(select),
        from_=_sorted(from_),
        where=where,
        group_by=_sorted(canon_expr(c, subs) for c in q.group_by),
        having=having,
        order_by=order_by,
        limit=None if q.limit is None else str(q.limit),
        set_op=None if q.set_op is None else (q.set_op.op, decompose(q.set_op.query)),
        nested=_sorted(subs),
    )


def _strip(x):
    if isinstance(x, ClauseSets):
        return without_values(x)
    if isinstance(x, tuple):
        if len(x) == 3 and x[0] == "val":
            return ("val", "value", VALUE_PLACEHOLDER)
        return tuple(_strip(i) for i in x)
    return x


def without_values(cs: ClauseSets) -> ClauseSets:
    """Replace every literal (and the limit) by a placeholder; re-sort the sets."""
    out = {}
    for f in fields(cs):
        value = getattr(cs, f.name)
        if f.name == "limit":
            out["limit"] = None if value is None else VALUE_PLACEHOLDER
        elif f.name == "set_op":
            out["set_op"] = None if value is None else (value[0], without_values(value[1]))
        else:
            out[f.name] = _sorted(_strip(i) for i in value)
    return ClauseSets(**out)
