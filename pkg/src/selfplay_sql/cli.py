"""Command-line entry point: ``selfplay-sql <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis import CSV_TABLES, FORMATS, corpus_report, emit_report
from .dataset import STOP_SYMBOL, export_training_sets, load_interactions
from .errors import SelfPlayError
from .evaluator import WITH_VALUES, WITHOUT_VALUES, evaluate_corpus, recall_at_k, try_parse
from .guard import validate_sql
from .interaction import Goal
from .schema import load_content_dir, load_schema_collection
from .selfplay import SelfPlayConfig, generate_corpus, make_agent, write_jsonl
from .templates import extract_bank, sample_goals

log = logging.getLogger("selfplay_sql")


def _dump(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_lines(lines, out):
    text = "".join(line + "\n" for line in lines)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def read_predictions(path) -> list[list[str]]:
    """One SQL per line; a blank line separates interactions."""
    groups, cur = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            cur.append(line.strip())
        elif cur:
            groups.append(cur)
            cur = []
    if cur:
        groups.append(cur)
    return groups


def _read_jsonl(path):
    return [json.loads(l) for l in Path(path).read_text(encoding="utf-8").splitlines() if l.strip()]


def _contents(args, schemas):
    return load_content_dir(args.content_dir, schemas) if args.content_dir else {}


# commands -----------------------------------------------------------------

def cmd_evaluate(args):
    schemas = load_schema_collection(args.tables)
    golds = load_interactions(args.gold, schemas)
    scores = evaluate_corpus(golds, read_predictions(args.pred), schemas, args.mode)
    _dump(scores.to_json(), args.out)


def cmd_sample_goals(args):
    schemas = load_schema_collection(args.tables)
    bank = extract_bank(load_interactions(args.train, schemas), schemas, strict=not args.lenient)
    goals = sample_goals(bank, schemas, _contents(args, schemas), args.count, args.seed, args.db or None)
    _write_lines((json.dumps(g.to_json(), sort_keys=True) for g in goals), args.out)


def cmd_validate(args):
    schemas = load_schema_collection(args.tables)
    if args.db not in schemas:
        raise SelfPlayError(f"unknown database {args.db!r}")
    schema = schemas[args.db]
    report = []
    for n, line in enumerate(Path(args.sql).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        violations = validate_sql(line.strip(), schema)
        report.append({"line": n, "sql": line.strip(), "valid": not violations,
                       "violations": [v.to_json() for v in violations]})
    _dump({"queries": report, "invalid": sum(not r["valid"] for r in report)}, args.out)
    return 1 if any(not r["valid"] for r in report) else 0


def cmd_self_play(args):
    schemas = load_schema_collection(args.tables)
    cfg = SelfPlayConfig(max_turns=args.max_turns, threshold_w=args.threshold, target_count=args.target_count,
                         seed=args.seed, stop_symbol=args.stop_symbol, workers=args.workers,
                         include_empty=args.include_empty)
    t2s = make_agent("text_to_sql", url=args.t2s_url, playbook=args.t2s_playbook)
    s2t = make_agent("sql_to_text", url=args.s2t_url, playbook=args.s2t_playbook)
    goals = bank = None
    if args.goals:
        goals = [Goal(g["db_id"], g["sql"], g["template"]) for g in _read_jsonl(args.goals)]
    elif args.train:
        bank = extract_bank(load_interactions(args.train, schemas), schemas, strict=False)
    else:
        raise SelfPlayError("give --train (to sample goals) or --goals")
    kept, stats = generate_corpus(bank, schemas, _contents(args, schemas), t2s, s2t, cfg, goals=goals)
    write_jsonl(kept, args.out)
    if args.stats:
        _dump(stats.to_json(), args.stats)
    log.info("kept %d of %d interactions", stats.kept, stats.attempted)


def cmd_export(args):
    schemas = load_schema_collection(args.tables)
    gold = load_interactions(args.gold, schemas)
    synthetic = load_interactions(args.synthetic, schemas) if args.synthetic else []
    _dump(export_training_sets(gold, synthetic, args.out_dir, schemas), None)


def cmd_stats(args):
    schemas = load_schema_collection(args.tables)
    corpus = load_interactions(args.corpus, schemas)
    reference = None
    if args.reference:
        reference = extract_bank(load_interactions(args.reference, schemas), schemas, strict=False)
    report = corpus_report(corpus, schemas, reference, args.top_k)
    text = emit_report(report, args.format, args.out, args.table)
    if not args.out:
        sys.stdout.write(text)


def cmd_recall(args):
    schemas = load_schema_collection(args.tables)
    beams, golds = [], []
    for n, rec in enumerate(_read_jsonl(args.beams)):
        db_id = rec.get("db_id", args.db)
        if db_id not in schemas:
            raise SelfPlayError(f"record {n}: unknown or missing db_id")
        gold = try_parse(rec["gold"], schemas[db_id])
        if gold is None:
            raise SelfPlayError(f"record {n}: gold query does not parse")
        golds.append(gold)
        beams.append([try_parse(s, schemas[db_id]) for s in rec["beams"]])
    _dump({str(k): recall_at_k(beams, golds, k, args.mode) for k in args.k}, args.out)


# parser -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="selfplay-sql", description="Multi-turn text-to-SQL data tooling.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def tables(sp):
        sp.add_argument("--tables", required=True, help="Spider-style tables.json")

    def out(sp, help_="output file (default: stdout)"):
        sp.add_argument("--out", "-o", help=help_)

    def mode(sp):
        sp.add_argument("--mode", choices=(WITHOUT_VALUES, WITH_VALUES), default=WITHOUT_VALUES)

    sp = sub.add_parser("evaluate", help="QM/IM of predictions against gold interactions")
    tables(sp)
    sp.add_argument("--gold", required=True)
    sp.add_argument("--pred", required=True, help="one SQL per line, blank line between interactions")
    mode(sp)
    out(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sample-goals", help="sample grounded goal queries from a template bank")
    tables(sp)
    sp.add_argument("--train", required=True, help="corpus the template bank is extracted from")
    sp.add_argument("--content-dir", help="directory of per-database content JSON files")
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--db", action="append", help="restrict sampling to this database (repeatable)")
    sp.add_argument("--lenient", action="store_true", help="skip unparseable training queries")
    out(sp)
    sp.set_defaults(func=cmd_sample_goals)

    sp = sub.add_parser("validate", help="check SQL queries (one per line) against a schema")
    tables(sp)
    sp.add_argument("--sql", required=True)
    sp.add_argument("--db", required=True)
    out(sp)
    sp.set_defaults(func=cmd_validate)

    d = SelfPlayConfig()
    sp = sub.add_parser("self-play", help="generate and filter synthetic interactions")
    tables(sp)
    sp.add_argument("--train", help="corpus for the goal template bank")
    sp.add_argument("--goals", help="JSONL goals from sample-goals, used instead of sampling")
    sp.add_argument("--content-dir")
    sp.add_argument("--max-turns", type=int, default=d.max_turns)
    sp.add_argument("--threshold", type=float, default=d.threshold_w, help="keep when score > threshold")
    sp.add_argument("--target-count", type=int, default=d.target_count)
    sp.add_argument("--seed", type=int, default=d.seed)
    sp.add_argument("--stop-symbol", default=STOP_SYMBOL)
    sp.add_argument("--workers", type=int, default=d.workers)
    sp.add_argument("--include-empty", action="store_true",
                    help="count substructures empty in both queries as matches")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--t2s-url")
    g.add_argument("--t2s-playbook")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--s2t-url")
    g.add_argument("--s2t-playbook")
    sp.add_argument("--out", "-o", required=True, help="kept interactions (JSONL)")
    sp.add_argument("--stats", help="write generation statistics here")
    sp.set_defaults(func=cmd_self_play)

    sp = sub.add_parser("export", help="write seq2seq training files")
    tables(sp)
    sp.add_argument("--gold", required=True)
    sp.add_argument("--synthetic")
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("stats", help="corpus statistics report")
    tables(sp)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--reference", help="corpus whose templates the overlap is measured against")
    sp.add_argument("--format", choices=FORMATS, default="json")
    sp.add_argument("--table", choices=CSV_TABLES, default="difficulty", help="table emitted in csv format")
    sp.add_argument("--top-k", type=int, default=10)
    out(sp)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("recall-at-k", help="recall@k over beam-search hypotheses")
    tables(sp)
    sp.add_argument("--beams", required=True, help="JSONL of {gold, beams, db_id}")
    sp.add_argument("--k", type=int, nargs="+", default=[1, 5, 10])
    sp.add_argument("--db", help="database for records without db_id")
    mode(sp)
    out(sp)
    sp.set_defaults(func=cmd_recall)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except (SelfPlayError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
