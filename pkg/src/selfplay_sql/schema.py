"""Database schemas and table contents in the Spider ``tables.json`` family format."""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import networkx as nx

from .errors import FormatError, InvariantError

COLUMN_TYPES = ("key", "text", "number", "time", "boolean", "others")
_DECLARED_TYPES = {"text", "number", "time", "boolean", "others"}

DELIMITER = " | "


@dataclass(frozen=True)
class Column:
    name: str
    col_type: str
    is_primary: bool = False


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]

    def __post_init__(self):
        if not self.name:
            raise InvariantError("table name must be non-empty")
        if not self.columns:
            raise InvariantError(f"table {self.name!r} has no columns")
        seen = set()
        for col in self.columns:
            if col.name in seen:
                raise InvariantError(f"duplicate column {col.name!r} in table {self.name!r}")
            seen.add(col.name)

    @cached_property
    def by_name(self) -> dict[str, Column]:
        return {c.name: c for c in self.columns}

    def column(self, name: str) -> Column | None:
        return self.by_name.get(name.lower())

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True)
class Schema:
    """One database: tables plus foreign keys as ``((table, col), (table, col))`` pairs."""

    db_id: str
    tables: tuple[Table, ...]
    foreign_keys: tuple[tuple[tuple[str, str], tuple[str, str]], ...] = ()

    def __post_init__(self):
        if not self.db_id:
            raise InvariantError("db_id must be non-empty")
        names = [t.name for t in self.tables]
        if len(set(names)) != len(names):
            raise InvariantError(f"{self.db_id}: duplicate table names")
        for fk in self.foreign_keys:
            for tname, cname in fk:
                table = self.table(tname)
                if table is None or table.column(cname) is None:
                    raise InvariantError(
                        f"{self.db_id}: foreign key endpoint {tname}.{cname} does not exist")
        for tname, cname in self.key_columns:
            if self.table(tname).column(cname).col_type != "key":
                raise InvariantError(f"{self.db_id}: {tname}.{cname} must have type key")

    @cached_property
    def _tables(self) -> dict[str, Table]:
        return {t.name: t for t in self.tables}

    def table(self, name: str) -> Table | None:
        return self._tables.get(name.lower())

    @property
    def table_names(self) -> list[str]:
        return [t.name for t in self.tables]

    @cached_property
    def key_columns(self) -> frozenset[tuple[str, str]]:
        keys = {(t.name, c.name) for t in self.tables for c in t.columns if c.is_primary}
        for a, b in self.foreign_keys:
            keys.add(a)
            keys.add(b)
        return frozenset(keys)

    @cached_property
    def column_index(self) -> dict[str, list[str]]:
        """Column name -> tables that define it, in table order."""
        index: dict[str, list[str]] = {}
        for t in self.tables:
            for c in t.columns:
                index.setdefault(c.name, []).append(t.name)
        return index

    def column_type(self, table: str, column: str) -> str | None:
        if column == "*":
            return "*"
        t = self.table(table)
        if t is None:
            return None
        c = t.column(column)
        return c.col_type if c else None

    def has_fk(self, a: tuple[str, str], b: tuple[str, str]) -> bool:
        return (a, b) in self._fk_set or (b, a) in self._fk_set

    @cached_property
    def _fk_set(self) -> frozenset:
        return frozenset(self.foreign_keys)

    def fks_between(self, t1: str, t2: str) -> list[tuple[tuple[str, str], tuple[str, str]]]:
        """Foreign keys linking two tables, oriented as (t1 side, t2 side)."""
        out = []
        for a, b in self.foreign_keys:
            if a[0] == t1 and b[0] == t2:
                out.append((a, b))
            elif b[0] == t1 and a[0] == t2:
                out.append((b, a))
        return out


class SchemaCollection(Mapping):
    """Read-only mapping of ``db_id`` to :class:`Schema`."""

    def __init__(self, schemas=()):
        self._schemas: dict[str, Schema] = {}
        for s in schemas:
            if s.db_id in self._schemas:
                raise InvariantError(f"duplicate db_id {s.db_id!r}")
            self._schemas[s.db_id] = s

    def __getitem__(self, db_id):
        return self._schemas[db_id]

    def __iter__(self):
        return iter(self._schemas)

    def __len__(self):
        return len(self._schemas)

    def __repr__(self):
        return f"SchemaCollection({len(self)} schemas)"


def _require(entry, key, db_id):
    if key not in entry:
        raise FormatError(f"database {db_id!r}: missing field {key!r}")
    return entry[key]


def schema_from_spider(entry: dict) -> Schema:
    """Build a :class:`Schema` from one object of a Spider ``tables.json`` file."""
    db_id = entry.get("db_id")
    if not isinstance(db_id, str) or not db_id:
        raise FormatError("database entry without a db_id")
    table_names = _require(entry, "table_names_original", db_id)
    column_names = _require(entry, "column_names_original", db_id)
    column_types = _require(entry, "column_types", db_id)
    primary_keys = _require(entry, "primary_keys", db_id)
    foreign_keys = _require(entry, "foreign_keys", db_id)
    if len(column_names) != len(column_types):
        raise FormatError(f"database {db_id!r}: field 'column_types' does not match column_names_original")

    def locate(idx):
        if not isinstance(idx, int) or not 0 <= idx < len(column_names):
            raise InvariantError(f"database {db_id!r}: column index {idx!r} does not exist")
        t_idx, cname = column_names[idx]
        if not 0 <= t_idx < len(table_names):
            raise InvariantError(f"database {db_id!r}: column index {idx!r} has no table")
        return table_names[t_idx].lower(), cname.lower()

    # newer Spider releases store composite primary keys as nested lists
    pk_idx = set()
    for pk in primary_keys:
        pk_idx.update(pk if isinstance(pk, list) else [pk])
    pk_cols = {locate(i) for i in pk_idx}

    fks = []
    for pair in foreign_keys:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise FormatError(f"database {db_id!r}: field 'foreign_keys' has malformed entry {pair!r}")
        fks.append((locate(pair[0]), locate(pair[1])))
    key_cols = pk_cols | {end for fk in fks for end in fk}

    columns_by_table: list[list[Column]] = [[] for _ in table_names]
    for (t_idx, cname), ctype in zip(column_names, column_types):
        if t_idx < 0:
            continue  # the "*" pseudo column
        if not 0 <= t_idx < len(table_names):
            raise FormatError(f"database {db_id!r}: field 'column_names_original' references table {t_idx}")
        tname, cname_l = table_names[t_idx].lower(), cname.lower()
        ctype = ctype.lower() if isinstance(ctype, str) else "others"
        if ctype not in _DECLARED_TYPES:
            ctype = "others"
        is_pk = (tname, cname_l) in pk_cols
        if (tname, cname_l) in key_cols:
            ctype = "key"
        columns_by_table[t_idx].append(Column(cname_l, ctype, is_pk))

    tables = tuple(Table(name.lower(), tuple(cols)) for name, cols in zip(table_names, columns_by_table))
    return Schema(db_id, tables, tuple(fks))


def load_schema_collection(path) -> SchemaCollection:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, list):
        raise FormatError(f"{path}: expected a JSON array of databases")
    return SchemaCollection(schema_from_spider(entry) for entry in raw)


def schema_to_spider(schema: Schema) -> dict:
    """Inverse of :func:`schema_from_spider` for the fields used downstream."""
    column_names = [[-1, "*"]]
    column_types = ["text"]
    index = {}
    for t_idx, t in enumerate(schema.tables):
        for c in t.columns:
            index[(t.name, c.name)] = len(column_names)
            column_names.append([t_idx, c.name])
            column_types.append("number" if c.col_type == "key" else c.col_type)
    return {
        "db_id": schema.db_id,
        "table_names_original": [t.name for t in schema.tables],
        "column_names_original": column_names,
        "column_types": column_types,
        "primary_keys": [index[(t.name, c.name)] for t in schema.tables for c in t.columns if c.is_primary],
        "foreign_keys": [[index[a], index[b]] for a, b in schema.foreign_keys],
    }


def serialize_schema(schema: Schema) -> str:
    """``db_id | table : col, col | ...``; cell values are never included."""
    parts = [schema.db_id]
    for t in schema.tables:
        parts.append(f"{t.name} : {', '.join(c.name for c in t.columns)}")
    return DELIMITER.join(parts)


def foreign_key_graph(schema: Schema) -> nx.MultiGraph:
    """Undirected multigraph with one node per table and one edge per foreign key."""
    g = nx.MultiGraph()
    g.add_nodes_from(schema.table_names)
    for (t1, c1), (t2, c2) in sorted(schema.foreign_keys):
        g.add_edge(t1, t2, columns=((t1, c1), (t2, c2)))
    return g


@dataclass(frozen=True)
class ContentStore:
    """Row tuples per table, used only as a source of literal values."""

    db_id: str
    rows: Mapping[str, list[tuple]] = field(default_factory=dict)

    def column_values(self, schema: Schema, table: str, column: str) -> list:
        rows = self.rows.get(table)
        if not rows:
            return []
        idx = schema.table(table).column_index(column)
        return [r[idx] for r in rows if r[idx] is not None]


def validate_content(store: ContentStore, schema: Schema) -> None:
    for tname, rows in store.rows.items():
        table = schema.table(tname)
        if table is None:
            raise InvariantError(f"{store.db_id}: content for unknown table {tname!r}")
        for row in rows:
            if len(row) != len(table.columns):
                raise InvariantError(
                    f"{store.db_id}.{tname}: row arity {len(row)} != {len(table.columns)} columns")


def load_content(path, schemas: SchemaCollection | None = None) -> ContentStore:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if "db_id" not in raw or "tables" not in raw:
        raise FormatError(f"{path}: content file needs 'db_id' and 'tables'")
    store = ContentStore(raw["db_id"], {k.lower(): [tuple(r) for r in v] for k, v in raw["tables"].items()})
    if schemas is not None:
        if store.db_id not in schemas:
            raise InvariantError(f"{path}: unknown db_id {store.db_id!r}")
        validate_content(store, schemas[store.db_id])
    return store


def load_content_dir(path, schemas: SchemaCollection | None = None) -> dict[str, ContentStore]:
    """Load every ``*.json`` content file in a directory, keyed by db_id."""
    stores = {}
    for p in sorted(Path(path).glob("*.json")):
        store = load_content(p, schemas)
        stores[store.db_id] = store
    return stores
