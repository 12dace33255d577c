"""Exact set match, goal-grounding score, QM/IM and query difficulty."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum

from .errors import BindError, CorpusError, LengthMismatch, SqlSyntaxError
from .sql import ClauseSets, QueryAst, decompose, parse_sql, without_values
from .sql.ast import Agg, BoolOp, Comparison, DerivedTable, Not, Subquery, walk_expr

WITH_VALUES = "with_values"
WITHOUT_VALUES = "without_values"

# substructure -> ClauseSets fields compared together
SUBSTRUCTURES = {
    "select": ("select",),
    "from": ("from_",),
    "where": ("where",),
    "group_by": ("group_by",),
    "having": ("having",),
    "order_by": ("order_by", "limit"),
    "set_op": ("set_op",),
    "nested": ("nested",),
}


class Difficulty(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"
    EXTRA_HARD = "extra_hard"


@dataclass
class MatchReport:
    per_substructure: dict[str, float]
    exact: bool
    partial_score: float


@dataclass
class CorpusScores:
    qm: float
    im: float
    per_turn_qm: dict[int, float] = field(default_factory=dict)
    per_difficulty_qm: dict[str, float] = field(default_factory=dict)
    n_questions: int = 0
    n_interactions: int = 0

    def to_json(self):
        return {
            "qm": self.qm,
            "im": self.im,
            "per_turn": {str(k): v for k, v in sorted(self.per_turn_qm.items())},
            "per_difficulty": dict(self.per_difficulty_qm),
            "n_questions": self.n_questions,
            "n_interactions": self.n_interactions,
        }


def _populated(cs: ClauseSets, fields_) -> bool:
    for f in fields_:
        value = getattr(cs, f)
        if value is not None and value != ():
            return True
    return False


def match_queries(pred: ClauseSets, gold: ClauseSets, mode: str = WITHOUT_VALUES,
                  include_empty: bool = False) -> MatchReport:
    """Compare two decomposed queries substructure by substructure.

    Substructures empty in both queries are left out of the mean unless
    ``include_empty`` is set, in which case they count as matches.
    """
    if mode == WITHOUT_VALUES:
        pred, gold = without_values(pred), without_values(gold)
    elif mode != WITH_VALUES:
        raise ValueError(f"unknown match mode {mode!r}")
    scores = {}
    for name, fields_ in SUBSTRUCTURES.items():
        if not include_empty and not (_populated(pred, fields_) or _populated(gold, fields_)):
            continue
        same = all(getattr(pred, f) == getattr(gold, f) for f in fields_)
        scores[name] = 1.0 if same else 0.0
    partial = sum(scores.values()) / len(scores) if scores else 1.0
    return MatchReport(scores, all(v == 1.0 for v in scores.values()), partial)


def filtering_score(pred_final: QueryAst, goal: QueryAst, include_empty: bool = False) -> float:
    return match_queries(decompose(pred_final), decompose(goal), WITH_VALUES, include_empty).partial_score


def question_match(pred: QueryAst | None, gold: QueryAst, mode: str = WITHOUT_VALUES) -> int:
    if pred is None:
        return 0
    return int(match_queries(decompose(pred), decompose(gold), mode).exact)


def interaction_match(preds, golds, mode: str = WITHOUT_VALUES) -> int:
    if len(preds) != len(golds):
        raise LengthMismatch(f"{len(preds)} predicted turns for {len(golds)} gold turns")
    result = 1
    for p, g in zip(preds, golds):
        result *= question_match(p, g, mode)
    return result


# difficulty ---------------------------------------------------------------

def _all_conditions(q: QueryAst):
    return [q.where, q.having] + list(q.from_.conditions)


def _count_or(cond) -> int:
    if isinstance(cond, BoolOp):
        own = len(cond.items) - 1 if cond.op == "or" else 0
        return own + sum(_count_or(i) for i in cond.items)
    if isinstance(cond, Not):
        return _count_or(cond.item)
    return 0


def _comparisons(cond):
    if isinstance(cond, Comparison):
        yield cond
    elif isinstance(cond, BoolOp):
        for i in cond.items:
            yield from _comparisons(i)
    elif isinstance(cond, Not):
        yield from _comparisons(cond.item)


def _has_agg(e) -> bool:
    return any(isinstance(x, Agg) for x in walk_expr(e))


def _nested_count(q: QueryAst) -> int:
    n = 1 if q.set_op is not None else 0
    n += sum(isinstance(s, DerivedTable) for s in q.from_.sources)
    for cond in _all_conditions(q):
        for cmp in _comparisons(cond):
            for e in (cmp.right, cmp.upper):
                n += isinstance(e, Subquery)
    return n


def component_counts(q: QueryAst) -> tuple[int, int, int]:
    """(simple components, nested queries, other features) as in the Spider hardness scheme."""
    comp1 = 0
    comp1 += q.where is not None
    comp1 += bool(q.group_by)
    comp1 += bool(q.order_by)
    comp1 += q.limit is not None
    comp1 += max(len(q.from_.sources) - 1, 0)
    conds = [c for c in _all_conditions(q) if c is not None]
    comp1 += sum(_count_or(c) for c in conds)
    comp1 += sum(cmp.op in ("like", "not like") for c in conds for cmp in _comparisons(c))

    comp2 = _nested_count(q)

    aggs = sum(_has_agg(e) for e in q.select)
    aggs += sum(_has_agg(cmp.left) for cmp in _comparisons(q.where))
    aggs += sum(_has_agg(c) for c in q.group_by)
    aggs += sum(_has_agg(i.expr) for i in q.order_by)
    aggs += sum(_has_agg(cmp.left) for cmp in _comparisons(q.having))
    others = 0
    others += aggs > 1
    others += len(q.select) > 1
    others += len(list(_comparisons(q.where))) > 1
    others += len(q.group_by) > 1
    return comp1, comp2, others


def difficulty(q: QueryAst) -> Difficulty:
    c1, c2, other = component_counts(q)
    if c1 <= 1 and other == 0 and c2 == 0:
        return Difficulty.EASY
    if (other <= 2 and c1 <= 1 and c2 == 0) or (c1 <= 2 and other < 2 and c2 == 0):
        return Difficulty.MEDIUM
    if ((other > 2 and c1 <= 2 and c2 == 0)
            or (2 < c1 <= 3 and other <= 2 and c2 == 0)
            or (c1 <= 1 and other == 0 and c2 <= 1)):
        return Difficulty.HARD
    return Difficulty.EXTRA_HARD


# beams and corpora --------------------------------------------------------

def recall_at_k(beams, golds, k: int, mode: str = WITHOUT_VALUES) -> float:
    """Fraction of examples whose first ``k`` hypotheses contain an exact match of gold.

    Hypotheses that failed to parse may be passed as ``None``.
    """
    if len(beams) != len(golds):
        raise LengthMismatch(f"{len(beams)} beam lists for {len(golds)} gold queries")
    if not golds:
        return 0.0
    hits = 0
    for beam, gold in zip(beams, golds):
        gold_cs = decompose(gold)
        for hyp in beam[:k]:
            if hyp is not None and match_queries(decompose(hyp), gold_cs, mode).exact:
                hits += 1
                break
    return hits / len(golds)


def try_parse(sql: str, schema):
    try:
        return parse_sql(sql, schema)
    except (SqlSyntaxError, BindError):
        return None


def evaluate_corpus(golds, preds, schemas, mode: str = WITHOUT_VALUES) -> CorpusScores:
    """Score predicted SQL strings (one list per interaction) against gold interactions."""
    if len(golds) != len(preds):
        raise LengthMismatch(f"{len(preds)} predicted interactions for {len(golds)} gold interactions")
    turn_hits = defaultdict(list)
    diff_hits = defaultdict(list)
    question_hits = []
    interaction_hits = []
    for i, (gold, pred) in enumerate(zip(golds, preds)):
        if len(pred) != len(gold.turns):
            raise LengthMismatch(f"interaction {i}: {len(pred)} predictions for {len(gold.turns)} turns")
        schema = schemas[gold.db_id]
        all_ok = 1
        for t, (turn, pred_sql) in enumerate(zip(gold.turns, pred)):
            try:
                gold_ast = parse_sql(turn.sql, schema)
            except (SqlSyntaxError, BindError) as exc:
                raise CorpusError(i, t, exc) from exc
            hit = question_match(try_parse(pred_sql, schema), gold_ast, mode)
            question_hits.append(hit)
            turn_hits[t + 1].append(hit)
            diff_hits[difficulty(gold_ast).value].append(hit)
            all_ok *= hit
        interaction_hits.append(all_ok)

    def mean(xs):
        return sum(xs) / len(xs) if xs else 0.0

    return CorpusScores(
        qm=mean(question_hits),
        im=mean(interaction_hits),
        per_turn_qm={t: mean(v) for t, v in sorted(turn_hits.items())},
        per_difficulty_qm={d.value: mean(diff_hits[d.value]) for d in Difficulty if diff_hits[d.value]},
        n_questions=len(question_hits),
        n_interactions=len(interaction_hits),
    )
