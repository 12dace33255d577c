"""Typed-slot templates, the empirical template bank and grounded goal sampling.

A template key drops the ``from`` clause (it is recovered from the slot
columns when a template is filled), replaces every column by
``{type}_col_{i}`` and every literal by ``value``::

    select count ( *_col_0 )
    select text_col_0 where text_col_1 = value
"""

from __future__ import annotations

import logging
import random
from collections import Counter
from dataclasses import dataclass, field

from .errors import BindError, CorpusError, FillFailure, NoCompatibleTemplate, SqlSyntaxError
from .guard import validate_query
from .interaction import Goal
from .schema import ContentStore, Schema
from .sql import parse_sql, render_sql
from .sql.ast import (
    Agg, BinOp, BoolOp, Column, Comparison, DerivedTable, FromClause, Literal, Not, OrderItem,
    QueryAst, SetOp, Slot, Subquery, TableNode, TableRef, ValueSlot, iter_queries,
)

log = logging.getLogger(__name__)

FILL_ATTEMPTS = 50
TEMPLATE_RESAMPLES = 20
DATABASE_RESAMPLES = 20

DEFAULT_VALUES = {
    "number": ("1", "number"),
    "key": ("1", "number"),
    "text": ("value", "string"),
    "time": ("2000-01-01", "string"),
    "boolean": ("T", "string"),
    "others": ("value", "string"),
}


@dataclass(frozen=True)
class JoinEdge:
    """Join between two table nodes of a skeleton, realised along a foreign key."""

    a: int
    b: int


@dataclass(frozen=True)
class Template:
    key: str
    skeleton: QueryAst = field(compare=False, repr=False)
    slot_table: tuple = ()  # ((label, col_type), ...)
    n_nodes: int = 0

    def node_requirements(self) -> dict[int, Counter]:
        """Per table node, how many distinct columns of each type the slots need."""
        need = {i: Counter() for i in range(self.n_nodes)}
        for slot in _skeleton_slots(self.skeleton):
            if slot.col_type != "*":
                need[slot.node][slot.col_type] += 1
        return need

    def join_edges(self) -> set[tuple[int, int]]:
        edges = set()
        for q in iter_queries(self.skeleton):
            for c in q.from_.conditions:
                if isinstance(c, JoinEdge):
                    edges.add((min(c.a, c.b), max(c.a, c.b)))
        return edges


# abstraction ----------------------------------------------------------------

class _Abstractor:
    def __init__(self, schema: Schema):
        self.schema = schema
        self.slots: dict[tuple, Slot] = {}
        self.per_type: Counter = Counter()
        self.nodes: dict[str, int] = {}

    def node(self, table):
        if table not in self.nodes:
            self.nodes[table] = len(self.nodes)
        return self.nodes[table]

    def slot(self, col: Column) -> Slot:
        if col.is_star:
            return Slot("*", 0, -1 if col.table is None else self.node(col.table))
        ident = (col.table, col.name)
        if ident not in self.slots:
            ctype = self.schema.column_type(col.table, col.name) or "others"
            self.slots[ident] = Slot(ctype, self.per_type[ctype], self.node(col.table))
            self.per_type[ctype] += 1
        return self.slots[ident]

    # key rendering doubles as slot numbering, so the two always agree
    def expr(self, e) -> str:
        if isinstance(e, Column):
            return self.slot(e).label
        if isinstance(e, Literal):
            return "null" if e.kind == "null" else "value"
        if isinstance(e, Agg):
            return f"{e.func} ( {'distinct ' if e.distinct else ''}{self.expr(e.arg)} )"
        if isinstance(e, BinOp):
            return f"{self.expr(e.left)} {e.op} {self.expr(e.right)}"
        if isinstance(e, Subquery):
            return f"( {self.query(e.query)} )"
        raise TypeError(type(e).__name__)

    def cond(self, c) -> str:
        if isinstance(c, Comparison):
            left = self.expr(c.left)
            if c.upper is not None:
                return f"{left} {c.op} {self.expr(c.right)} and {self.expr(c.upper)}"
            return f"{left} {c.op} {self.expr(c.right)}"
        if isinstance(c, BoolOp):
            parts = []
            for item in c.items:
                text = self.cond(item)
                parts.append(f"( {text} )" if isinstance(item, BoolOp) else text)
            return f" {c.op} ".join(parts)
        if isinstance(c, Not):
            text = self.cond(c.item)
            return f"not ( {text} )" if isinstance(c.item, BoolOp) else f"not {text}"
        raise TypeError(type(c).__name__)

    def query(self, q: QueryAst) -> str:
        for src in q.from_.sources:
            if isinstance(src, TableRef):
                self.node(src.name)
        parts = ["select"]
        if q.distinct:
            parts.append("distinct")
        parts.append(" , ".join(self.expr(e) for e in q.select))
        derived = [s for s in q.from_.sources if isinstance(s, DerivedTable)]
        if derived:
            parts.append("from " + " , ".join(f"( {self.query(s.query)} )" for s in derived))
        if q.where is not None:
            parts.append("where " + self.cond(q.where))
        if q.group_by:
            parts.append("group_by " + " , ".join(self.expr(c) for c in q.group_by))
        if q.having is not None:
            parts.append("having " + self.cond(q.having))
        if q.order_by:
            parts.append("order_by " + " , ".join(f"{self.expr(i.expr)} {i.direction}" for i in q.order_by))
        if q.limit is not None:
            parts.append("limit_value")
        if q.set_op is not None:
            parts.append(f"{q.set_op.op} {self.query(q.set_op.query)}")
        return " ".join(parts)

    # skeleton
    def sk_expr(self, e):
        if isinstance(e, Column):
            return self.slot(e)
        if isinstance(e, Literal):
            return e if e.kind == "null" else ValueSlot()
        if isinstance(e, Agg):
            return Agg(e.func, self.sk_expr(e.arg), e.distinct)
        if isinstance(e, BinOp):
            return BinOp(e.op, self.sk_expr(e.left), self.sk_expr(e.right))
        if isinstance(e, Subquery):
            return Subquery(self.sk_query(e.query))
        raise TypeError(type(e).__name__)

    def sk_cond(self, c):
        if c is None:
            return None
        if isinstance(c, Comparison):
            return Comparison(c.op, self.sk_expr(c.left),
                              None if c.right is None else self.sk_expr(c.right),
                              None if c.upper is None else self.sk_expr(c.upper))
        if isinstance(c, BoolOp):
            return BoolOp(c.op, tuple(self.sk_cond(i) for i in c.items))
        return Not(self.sk_cond(c.item))

    def sk_query(self, q: QueryAst) -> QueryAst:
        sources = []
        for src in q.from_.sources:
            if isinstance(src, TableRef):
                sources.append(TableNode(self.node(src.name)))
            else:
                sources.append(DerivedTable(self.sk_query(src.query)))
        conditions = []
        for c in q.from_.conditions:
            if (isinstance(c, Comparison) and c.op == "=" and isinstance(c.left, Column)
                    and isinstance(c.right, Column) and not c.left.is_star and not c.right.is_star):
                conditions.append(JoinEdge(self.node(c.left.table), self.node(c.right.table)))
        return QueryAst(
            select=tuple(self.sk_expr(e) for e in q.select),
            from_=FromClause(tuple(sources), tuple(conditions)),
            distinct=q.distinct,
            where=self.sk_cond(q.where),
            group_by=tuple(self.sk_expr(c) for c in q.group_by),
            having=self.sk_cond(q.having),
            order_by=tuple(OrderItem(self.sk_expr(i.expr), i.direction) for i in q.order_by),
            limit=None if q.limit is None else ValueSlot(),
            set_op=None if q.set_op is None else SetOp(q.set_op.op, self.sk_query(q.set_op.query)),
        )


def abstract_to_template(ast: QueryAst, schema: Schema) -> Template:
    a = _Abstractor(schema)
    key = a.query(ast)
    skeleton = a.sk_query(ast)
    slot_table = tuple(sorted(((s.label, s.col_type) for s in a.slots.values()),
                              key=lambda x: (x[1], int(x[0].rsplit("_", 1)[1]))))
    return Template(key, skeleton, slot_table, len(a.nodes))


def _skeleton_exprs(q: QueryAst):
    from .sql.ast import cond_exprs
    yield from q.select
    yield from cond_exprs(q.where)
    yield from q.group_by
    yield from cond_exprs(q.having)
    for i in q.order_by:
        yield i.expr


def _skeleton_slots(skeleton: QueryAst):
    seen = set()
    for q in iter_queries(skeleton):
        for e in _skeleton_exprs(q):
            stack = [e]
            while stack:
                x = stack.pop()
                if isinstance(x, Slot):
                    if x not in seen:
                        seen.add(x)
                        yield x
                elif isinstance(x, Agg):
                    stack.append(x.arg)
                elif isinstance(x, BinOp):
                    stack.extend((x.left, x.right))


# bank ---------------------------------------------------------------------

class TemplateBank:
    """Occurrence counts per template key, with one representative skeleton per key.

    The representative is the variant spanning the fewest tables.
    """

    def __init__(self):
        self.counts: Counter = Counter()
        self.templates: dict[str, Template] = {}
        self.skipped = 0

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def add(self, template: Template, count: int = 1):
        self.counts[template.key] += count
        current = self.templates.get(template.key)
        if current is None or template.n_nodes < current.n_nodes:
            self.templates[template.key] = template

    def proportion(self, key: str) -> float:
        total = self.total
        return self.counts[key] / total if total else 0.0

    def proportions(self) -> dict[str, float]:
        total = self.total
        return {k: c / total for k, c in self.counts.items()} if total else {}

    def top(self, k: int = 10) -> list[tuple[str, float]]:
        total = self.total
        ranked = sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
        return [(key, c / total) for key, c in ranked]

    def __len__(self):
        return len(self.counts)

    def __contains__(self, key):
        return key in self.counts


def extract_bank(corpus, schemas, strict: bool = True) -> TemplateBank:
    """Count templates over every turn of every interaction.

    With ``strict=False`` unparseable turns are skipped and counted in ``bank.skipped``.
    """
    bank = TemplateBank()
    for i, inter in enumerate(corpus):
        schema = schemas[inter.db_id]
        for t, turn in enumerate(inter.turns):
            try:
                ast = parse_sql(turn.sql, schema)
            except (SqlSyntaxError, BindError) as exc:
                if strict:
                    raise CorpusError(i, t, exc) from exc
                bank.skipped += 1
                continue
            bank.add(abstract_to_template(ast, schema))
    return bank


def template_overlap(bank_a: TemplateBank, bank_b: TemplateBank) -> float:
    """Fraction of ``bank_a``'s distinct keys that also occur in ``bank_b``."""
    if not len(bank_a):
        return 0.0
    return sum(1 for k in bank_a.counts if k in bank_b) / len(bank_a)


# filling ------------------------------------------------------------------

def _columns_by_type(schema: Schema):
    out = {}
    for t in schema.tables:
        by_type = {}
        for c in t.columns:
            by_type.setdefault(c.col_type, []).append(c.name)
        out[t.name] = by_type
    return out


def _find_mapping(template: Template, schema: Schema, rng: random.Random | None):
    """Injective node -> table assignment satisfying slot types and join edges, or None."""
    need = template.node_requirements()
    edges = template.join_edges()
    by_type = _columns_by_type(schema)
    candidates = {}
    for node, counts in need.items():
        ok = [t for t in schema.table_names
              if all(len(by_type[t].get(ct, ())) >= n for ct, n in counts.items())]
        if not ok:
            return None
        candidates[node] = ok
    order = sorted(need, key=lambda n: len(candidates[n]))
    mapping: dict[int, str] = {}

    def linked(node, table):
        for a, b in edges:
            if a == node == b:
                if not schema.fks_between(table, table):
                    return False
            elif a == node and b in mapping:
                if not schema.fks_between(table, mapping[b]):
                    return False
            elif b == node and a in mapping:
                if not schema.fks_between(mapping[a], table):
                    return False
        return True

    def search(i):
        if i == len(order):
            return True
        node = order[i]
        cands = list(candidates[node])
        if rng is not None:
            rng.shuffle(cands)
        used = set(mapping.values())
        for table in cands:
            if table in used or not linked(node, table):
                continue
            mapping[node] = table
            if search(i + 1):
                return True
            del mapping[node]
        return False

    return dict(mapping) if search(0) else None


def compatible(template: Template, schema: Schema) -> bool:
    """Whether some assignment of distinct, correctly typed columns fills every slot."""
    return _find_mapping(template, schema, None) is not None


def _format_number(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int) or (isinstance(v, float) and v.is_integer() and abs(v) < 1e15):
        return str(int(v))
    text = repr(float(v))
    return format(float(v), "f") if "e" in text or "n" in text else text


def _as_number(v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return v
    try:
        return float(str(v))
    except ValueError:
        return None


def _value_literal(col_type: str, v) -> Literal:
    if col_type in ("number", "key"):
        num = _as_number(v)
        if num is not None and num == num and abs(num) != float("inf"):
            return Literal(_format_number(num), "number")
        if col_type == "number":
            return Literal(*DEFAULT_VALUES["number"])
    return Literal(str(v), "string")


class _Filler:
    def __init__(self, template, schema, content: ContentStore | None, rng, mapping):
        self.t = template
        self.schema = schema
        self.content = content
        self.rng = rng
        self.mapping = mapping
        self.cols: dict[Slot, Column] = {}
        by_type = _columns_by_type(schema)
        slots = sorted(_skeleton_slots(template.skeleton), key=lambda s: (s.node, s.col_type, s.index))
        grouped = {}
        for s in slots:
            if s.col_type != "*":
                grouped.setdefault((s.node, s.col_type), []).append(s)
        for (node, ctype), group in grouped.items():
            table = mapping[node]
            names = rng.sample(by_type[table][ctype], len(group))
            for s, name in zip(group, names):
                self.cols[s] = Column(table, name)

    def value_for(self, anchor) -> Literal:
        if isinstance(anchor, Column) and not anchor.is_star:
            ctype = self.schema.column_type(anchor.table, anchor.name)
            values = []
            if self.content is not None:
                values = self.content.column_values(self.schema, anchor.table, anchor.name)
            if values:
                return _value_literal(ctype, self.rng.choice(values))
            return Literal(*DEFAULT_VALUES.get(ctype, DEFAULT_VALUES["others"]))
        return Literal(str(self.rng.randint(1, 3)), "number")

    def expr(self, e, anchor=None):
        if isinstance(e, Slot):
            if e.col_type == "*":
                return Column(None if e.node < 0 else self.mapping[e.node], "*")
            return self.cols[e]
        if isinstance(e, ValueSlot):
            return self.value_for(anchor)
        if isinstance(e, Agg):
            return Agg(e.func, self.expr(e.arg), e.distinct)
        if isinstance(e, BinOp):
            return BinOp(e.op, self.expr(e.left), self.expr(e.right))
        if isinstance(e, Subquery):
            return Subquery(self.query(e.query))
        return e

    def cond(self, c):
        if c is None:
            return None
        if isinstance(c, BoolOp):
            return BoolOp(c.op, tuple(self.cond(i) for i in c.items))
        if isinstance(c, Not):
            return Not(self.cond(c.item))
        left = self.expr(c.left)
        anchor = left
        if isinstance(c.left, ValueSlot) and c.right is not None and not isinstance(c.right, ValueSlot):
            right = self.expr(c.right)
            anchor = right
            left = self.value_for(anchor)
        else:
            right = None if c.right is None else self.expr(c.right, anchor)
        upper = None if c.upper is None else self.expr(c.upper, anchor)
        if c.op in ("like", "not like") and isinstance(right, Literal):
            right = Literal(f"%{right.value}%", "string")
        if upper is not None and isinstance(right, Literal) and isinstance(upper, Literal):
            lo, hi = _as_number(right.value), _as_number(upper.value)
            if lo is not None and hi is not None and lo > hi:
                right, upper = upper, right
        return Comparison(c.op, left, right, upper)

    def query(self, q: QueryAst) -> QueryAst:
        sources = []
        for src in q.from_.sources:
            if isinstance(src, TableNode):
                sources.append(TableRef(self.mapping[src.index]))
            else:
                sources.append(DerivedTable(self.query(src.query)))
        conditions = []
        for edge in q.from_.conditions:
            ta, tb = self.mapping[edge.a], self.mapping[edge.b]
            (a_t, a_c), (b_t, b_c) = self.rng.choice(self.schema.fks_between(ta, tb))
            conditions.append(Comparison("=", Column(a_t, a_c), Column(b_t, b_c)))
        return QueryAst(
            select=tuple(self.expr(e) for e in q.select),
            from_=FromClause(tuple(sources), tuple(conditions)),
            distinct=q.distinct,
            where=self.cond(q.where),
            group_by=tuple(self.expr(c) for c in q.group_by),
            having=self.cond(q.having),
            order_by=tuple(OrderItem(self.expr(i.expr), i.direction) for i in q.order_by),
            limit=None if q.limit is None else 1,
            set_op=None if q.set_op is None else SetOp(q.set_op.op, self.query(q.set_op.query)),
        )


def fill_slots(template: Template, schema: Schema, content: ContentStore | None,
               rng: random.Random, attempts: int = FILL_ATTEMPTS) -> QueryAst:
    """Instantiate ``template`` on ``schema``; the result passes the guard.

    Raises :class:`FillFailure` when no valid instantiation is found within ``attempts``.
    """
    for _ in range(attempts):
        mapping = _find_mapping(template, schema, rng)
        if mapping is None:
            break
        query = _Filler(template, schema, content, rng, mapping).query(template.skeleton)
        if not validate_query(query, schema):
            return query
    raise FillFailure(f"could not fill {template.key!r} on {schema.db_id}")


class GoalSampler:
    """Grounded goal sampling over a set of databases.

    A database is drawn uniformly, the bank is restricted to templates that can be
    filled on it, one is drawn by empirical count and its slots are filled from the
    database. Each sampler owns its random state.
    """

    def __init__(self, bank: TemplateBank, schemas, contents=None, seed: int = 0, db_ids=None):
        if not len(bank):
            raise NoCompatibleTemplate("template bank is empty")
        self.bank = bank
        self.schemas = schemas
        self.contents = contents or {}
        self.rng = random.Random(seed)
        self.db_ids = sorted(db_ids if db_ids is not None else schemas)
        self._compatible: dict[str, list[str]] = {}

    def compatible_keys(self, db_id: str) -> list[str]:
        if db_id not in self._compatible:
            schema = self.schemas[db_id]
            self._compatible[db_id] = [k for k, t in self.bank.templates.items() if compatible(t, schema)]
        return self._compatible[db_id]

    def sample(self) -> Goal:
        saw_compatible = False
        for _ in range(DATABASE_RESAMPLES):
            db_id = self.rng.choice(self.db_ids)
            keys = self.compatible_keys(db_id)
            if not keys:
                continue
            saw_compatible = True
            schema = self.schemas[db_id]
            remaining = list(keys)
            for _ in range(TEMPLATE_RESAMPLES):
                if not remaining:
                    break
                key = self.rng.choices(remaining, weights=[self.bank.counts[k] for k in remaining])[0]
                try:
                    query = fill_slots(self.bank.templates[key], schema, self.contents.get(db_id), self.rng)
                except FillFailure:
                    log.debug("fill failed for %r on %s", key, db_id)
                    remaining.remove(key)
                    continue
                return Goal(db_id, render_sql(query), key, query)
        if saw_compatible:
            raise FillFailure("no template could be filled within the attempt budget")
        raise NoCompatibleTemplate("no sampled database is compatible with any template")


def sample_goal(bank: TemplateBank, schemas, contents=None, rng_seed: int = 0, db_ids=None) -> Goal:
    return GoalSampler(bank, schemas, contents, rng_seed, db_ids).sample()


def sample_goals(bank, schemas, contents=None, count: int = 1, seed: int = 0, db_ids=None) -> list[Goal]:
    sampler = GoalSampler(bank, schemas, contents, seed, db_ids)
    return [sampler.sample() for _ in range(count)]
