"""Text-to-SQL and SQL-to-text agents: HTTP clients and scripted playbooks.

Wire protocol (JSON bodies)::

    POST {base}/text2sql  {utterance, context: [str], schema: str}                -> {sql}
    POST {base}/sql2text  {goal_sql, prev_sql, context: [str], schema: str}       -> {utterance, stop}

``context`` holds the previous user utterances in chronological order.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from pathlib import Path

from ..errors import AgentProtocolError, AgentUnreachable

GOAL_DIRECTIVE = "<goal>"


def _post(url: str, payload: dict, timeout: float) -> dict:
    data = json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(url, data=data, headers={"Content-Type": "application/json"}, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            body = resp.read()
    except urllib.error.HTTPError as exc:
        raise AgentProtocolError(f"{url}: HTTP {exc.code}") from exc
    except (urllib.error.URLError, OSError) as exc:
        raise AgentUnreachable(f"{url}: {exc}") from exc
    try:
        out = json.loads(body)
    except json.JSONDecodeError as exc:
        raise AgentProtocolError(f"{url}: response is not JSON") from exc
    if not isinstance(out, dict):
        raise AgentProtocolError(f"{url}: response is not a JSON object")
    return out


class HttpTextToSql:
    kind = "text_to_sql"

    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url.rstrip("/") + "/text2sql"
        self.timeout = timeout

    def text_to_sql(self, utterance, context, schema, goal=None, turn=None) -> str:
        out = _post(self.url, {"utterance": utterance, "context": list(context), "schema": schema}, self.timeout)
        if not isinstance(out.get("sql"), str):
            raise AgentProtocolError(f"{self.url}: missing string field 'sql'")
        return out["sql"]


class HttpSqlToText:
    kind = "sql_to_text"

    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url.rstrip("/") + "/sql2text"
        self.timeout = timeout

    def sql_to_text(self, goal_sql, prev_sql, context, schema, goal=None, turn=None) -> tuple[str, bool]:
        payload = {"goal_sql": goal_sql, "prev_sql": prev_sql, "context": list(context), "schema": schema}
        out = _post(self.url, payload, self.timeout)
        utterance, stop = out.get("utterance"), out.get("stop", False)
        if not isinstance(utterance, str) or not isinstance(stop, bool):
            raise AgentProtocolError(f"{self.url}: expected {{utterance: str, stop: bool}}")
        return utterance, stop


class _Playbook:
    """Canned responses looked up by (template key, turn), most specific entry first.

    Entries may also carry ``db_id``; ``template`` may be ``"*"``.
    """

    def __init__(self, entries, required):
        if not isinstance(entries, list):
            raise AgentProtocolError("playbook must be a JSON list")
        self.index = {}
        for e in entries:
            if not isinstance(e, dict) or "turn" not in e or any(f not in e for f in required):
                raise AgentProtocolError(f"malformed playbook entry {e!r}")
            self.index[(e.get("template", "*"), int(e["turn"]), e.get("db_id"))] = e

    def lookup(self, goal, turn):
        key = goal.template_key if goal is not None else "*"
        db = goal.db_id if goal is not None else None
        for probe in ((key, turn, db), (key, turn, None), ("*", turn, db), ("*", turn, None)):
            if probe in self.index:
                return self.index[probe]
        raise AgentProtocolError(f"playbook has no response for template {key!r}, turn {turn}")

    @staticmethod
    def read(path):
        return json.loads(Path(path).read_text(encoding="utf-8"))


class ScriptedTextToSql:
    kind = "text_to_sql"

    def __init__(self, playbook):
        self.playbook = _Playbook(playbook, ("sql",))

    @classmethod
    def from_file(cls, path):
        return cls(_Playbook.read(path))

    def text_to_sql(self, utterance, context, schema, goal=None, turn=None) -> str:
        sql = self.playbook.lookup(goal, turn)["sql"]
        if sql == GOAL_DIRECTIVE:
            if goal is None:
                raise AgentProtocolError("<goal> directive used without a goal")
            return goal.sql
        return sql


class ScriptedSqlToText:
    kind = "sql_to_text"

    def __init__(self, playbook):
        self.playbook = _Playbook(playbook, ("utterance",))

    @classmethod
    def from_file(cls, path):
        return cls(_Playbook.read(path))

    def sql_to_text(self, goal_sql, prev_sql, context, schema, goal=None, turn=None) -> tuple[str, bool]:
        entry = self.playbook.lookup(goal, turn)
        return entry["utterance"], bool(entry.get("stop", False))


def make_agent(kind: str, url: str | None = None, playbook=None):
    """Build an agent from either a base URL or a playbook (list or file path)."""
    if (url is None) == (playbook is None):
        raise ValueError("give exactly one of url or playbook")
    if kind == "text_to_sql":
        if url:
            return HttpTextToSql(url)
        return ScriptedTextToSql(playbook if isinstance(playbook, list) else _Playbook.read(playbook))
    if kind == "sql_to_text":
        if url:
            return HttpSqlToText(url)
        return ScriptedSqlToText(playbook if isinstance(playbook, list) else _Playbook.read(playbook))
    raise ValueError(f"unknown agent kind {kind!r}")
