from pathlib import Path

import pytest

from selfplay_sql.dataset import load_interactions
from selfplay_sql.schema import load_content_dir, load_schema_collection
from selfplay_sql.sql import parse_sql

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def schemas():
    return load_schema_collection(DATA / "tables.json")


@pytest.fixture(scope="session")
def contents(schemas):
    return load_content_dir(DATA / "content", schemas)


@pytest.fixture(scope="session")
def gold(schemas):
    return load_interactions(DATA / "gold_interactions.json", schemas)


@pytest.fixture(scope="session")
def q(schemas):
    def parse(sql, db="gas_company"):
        return parse_sql(sql, schemas[db])
    return parse


# assorted queries covering the supported dialect, keyed by database
DIALECT_QUERIES = [
    ("gas_company", "select distinct headquarters from company"),
    ("gas_company", "select count(distinct main_industry) from company"),
    ("gas_company", "select company, rank from company order by sales_billion desc limit 3"),
    ("gas_company", "select main_industry, sum(market_value), max(market_value) from company group by main_industry"),
    ("gas_company", "select headquarters from company where main_industry = 'Oil and gas' or sales_billion > 200"),
    ("gas_company", "select headquarters from company where main_industry = 'Banking' intersect "
                    "select headquarters from company where main_industry = 'Oil and gas'"),
    ("gas_company", "select location from gas_station where open_year between 1999 and 2002"),
    ("gas_company", "select manager_name from gas_station where open_year > 2000 group by manager_name "
                    "order by count(*) desc limit 1"),
    ("gas_company", "select t2.company, count(*) from station_company as t1 join company as t2 "
                    "on t1.company_id = t2.company_id group by t1.company_id"),
    ("gas_company", "select company from company where company_id not in (select company_id from station_company)"),
    ("gas_company", "select location from gas_station except select t1.location from gas_station as t1 "
                    "join station_company as t2 on t1.station_id = t2.station_id"),
    ("concert_singer", "select name, country, age from singer order by age desc"),
    ("concert_singer", "select avg(age), min(age), max(age) from singer where country = 'France'"),
    ("concert_singer", "select song_name from singer where age > (select avg(age) from singer)"),
    ("concert_singer", "select name from stadium where capacity > 5000 and average < 2000"),
    ("concert_singer", "select t2.name, count(*) from concert as t1 join stadium as t2 "
                       "on t1.stadium_id = t2.stadium_id group by t1.stadium_id"),
    ("concert_singer", "select name from singer where name like '%Brown%'"),
    ("concert_singer", "select count(*) from singer where is_male = 'T'"),
    ("concert_singer", "select country from singer where age > 40 union select country from singer where age < 30"),
    ("concert_singer", "select max(capacity), average from stadium"),
    ("concert_singer", "select t3.name from singer_in_concert as t1 join concert as t2 on t1.concert_id = t2.concert_id "
                       "join stadium as t3 on t2.stadium_id = t3.stadium_id where t2.year = '2014'"),
    ("cre_doc_template_mgt", "select template_type_code, count(*) from templates group by template_type_code "
                             "having count(*) >= 2"),
    ("cre_doc_template_mgt", "select template_id from templates where version_number > 5 and template_type_code = 'PP'"),
    ("cre_doc_template_mgt", "select t2.template_type_description from templates as t1 join ref_template_types as t2 "
                             "on t1.template_type_code = t2.template_type_code where t1.date_effective_from > '2000-01-01'"),
    ("real_estate_properties", "select property_name from properties where room_count >= 8 or property_type_code = 'HSE'"),
    ("real_estate_properties", "select max(agreed_selling_price - vendor_requested_price) from properties"),
    ("poker_player", "select t1.name from people as t1 join poker_player as t2 on t1.people_id = t2.people_id "
                     "order by t2.earnings desc limit 1"),
    ("poker_player", "select nationality, count(*) from people group by nationality order by count(*) desc"),
    ("poker_player", "select name from people where nationality != 'Russia'"),
    ("poker_player", "select avg(earnings) from poker_player where best_finish is not null"),
    ("flight_2", "select count(*) from flights as t1 join airports as t2 on t1.destairport = t2.airportcode "
                 "where t2.city = 'Aberdeen'"),
    ("flight_2", "select airportname from airports where airportcode not in "
                 "(select sourceairport from flights union select destairport from flights)"),
    ("flight_2", "select city from airports group by city having count(*) > 1"),
    ("flight_2", "select t.airline from (select airline, count(*) from flights group by airline) as t"),
]


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in nodeid and (rep.when == "call" or outcome == "skipped"):
                name = nodeid.split("::")[-1][len("test_criterion_"):]
                num, _, label = name.partition("_")
                lines.append((int(num), f"criterion {num} ({label.replace('_', ' ')}): {outcome.upper()}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
