import pytest
from hypothesis import given, settings, strategies as st

from selfplay_sql.guard import check_prefix, validate_query, validate_sql
from selfplay_sql.sql import parse_sql, render_sql
from selfplay_sql.sql.ast import Column, FromClause, QueryAst, TableRef

from conftest import DIALECT_QUERIES

TRANSCRIPT_TURN3 = ("select t3.location, t2.company from station_company as t1 join company as t2 "
                 "on t1.company_id = t2.company_id join gas_station as t3 on t1.station_id = t3.station_id "
                 "order by t2.assets_billion desc")


def kinds(sql, schemas, db="gas_company"):
    return [v.kind for v in validate_sql(sql, schemas[db])]


def test_transcript_query_is_valid(schemas):
    assert kinds(TRANSCRIPT_TURN3, schemas) == []


@pytest.mark.parametrize("db,sql", DIALECT_QUERIES)
def test_dialect_queries_valid(schemas, db, sql):
    ast = parse_sql(sql, schemas[db])
    assert validate_query(ast, schemas[db]) == []
    assert validate_query(parse_sql(render_sql(ast), schemas[db]), schemas[db]) == []


def test_scope_violations(schemas):
    assert kinds("select company from gas_station", schemas) == ["scope"]
    assert kinds("select company.company from gas_station", schemas) == ["scope"]
    ast = QueryAst(select=(Column("company", "company"),), from_=FromClause((TableRef("gas_station"),)))
    assert [v.kind for v in validate_query(ast, schemas["gas_company"])] == ["scope"]


def test_unknown_identifiers(schemas):
    assert kinds("select zz from gas_station", schemas) == ["unknown_identifier"]
    assert kinds("select location from nowhere", schemas) == ["unknown_identifier"]


@pytest.mark.parametrize("sql", [
    "select location from gas_station where location = 5",
    "select sum(location) from gas_station",
    "select location from gas_station where open_year = 'recent'",
    "select location from gas_station where open_year like '%9%'",
    "select location from gas_station where open_year + location > 3",
])
def test_type_mismatch(schemas, sql):
    assert kinds(sql, schemas) == ["type_mismatch"]


def test_boolean_ordering(schemas):
    assert kinds("select name from singer where is_male > 'T'", schemas, "concert_singer") == ["type_mismatch"]


@pytest.mark.parametrize("sql", [
    "select location from gas_station where count(*) > 1",
    "select location from gas_station having count(*) > 1",
    "select max(count(*)) from gas_station",
])
def test_aggregate_misuse(schemas, sql):
    assert kinds(sql, schemas) == ["aggregate_misuse"]


def test_join_off_foreign_keys(schemas):
    assert kinds("select t1.location from gas_station as t1 join company as t2 on t1.station_id = t2.company_id",
                 schemas) == ["join_unrealizable"]


def test_violation_location_inside_text(schemas):
    sql = "select location from gas_station where count(*) > 1"
    (v,) = validate_sql(sql, schemas["gas_company"])
    assert 0 <= v.location[0] <= v.location[1] <= len(sql)
    assert v.to_json()["kind"] == "aggregate_misuse"


def test_syntax_violation(schemas):
    (v,) = validate_sql("select location gas_station from", schemas["gas_company"])
    assert v.kind == "syntax"


# prefixes ----------------------------------------------------------------------------

def state(prefix, schemas, db="gas_company"):
    return check_prefix(prefix, schemas[db]).state


@pytest.mark.parametrize("prefix,expected", [
    ("", "admissible"),
    ("select ", "admissible"),
    ("sel", "admissible"),
    ("select loc", "admissible"),
    ("select location from gas", "admissible"),
    ("select location from gas_station where location = 'Her", "admissible"),
    ("select location from gas_station where open_year !", "admissible"),
    ("select location from gas_station", "complete"),
    ("select unknown_col from gas_station", "inadmissible"),
    ("select unknown_col ", "admissible"),  # could still become a qualifier
    ("select unknown_col , ", "inadmissible"),
    ("select location from nowhere", "inadmissible"),
    ("select location from nowhere ", "inadmissible"),
    ("select location location location", "inadmissible"),
    ("from", "admissible"),  # a word at the end may still grow
    ("from ", "inadmissible"),
    ("select location from gas_station where ) ", "inadmissible"),
])
def test_prefix_examples(schemas, prefix, expected):
    assert state(prefix, schemas) == expected


def test_inadmissible_prefix_carries_violation(schemas):
    st_ = check_prefix("select unknown_col from gas_station", schemas["gas_company"])
    assert st_.violation.kind == "unknown_identifier"
    assert st_.violation.location == (7, 18)


def _fixture_queries(gold):
    return DIALECT_QUERIES + [(i.db_id, t.sql) for i in gold for t in i.turns]


def test_every_character_prefix_admissible(schemas, gold):
    for db, sql in _fixture_queries(gold):
        for k in range(len(sql)):
            assert state(sql[:k], schemas, db) != "inadmissible", sql[:k]
        assert state(sql, schemas, db) == "complete"


_VOCAB = ["select", "from", "where", "count", "(", ")", "*", "=", ">", "1", "'x'", ",", "and", "or",
          "location", "open_year", "gas_station", "company", "zz", "group", "by", "order", "desc", "limit",
          "join", "on", "as", "t1", "t1.location", "not", "in", "distinct"]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(_VOCAB), min_size=1, max_size=10))
def test_inadmissible_is_monotone_and_sound(schemas, words):
    schema = schemas["gas_company"]
    seen_inadmissible = False
    for k in range(1, len(words) + 1):
        text = " ".join(words[:k]) + " "
        s = check_prefix(text, schema).state
        if seen_inadmissible:
            assert s == "inadmissible", text
        seen_inadmissible |= s == "inadmissible"
    if seen_inadmissible:
        assert validate_sql(" ".join(words), schema)
