"""SQL tokenizer producing positioned tokens."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import SqlSyntaxError

KEYWORDS = frozenset("""
    select distinct from where group by having order limit asc desc and or not in like
    between is null join on as intersect union except inner
""".split())

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>\d+\.\d*|\.\d+|\d+)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<quoted>`[^`]*`|\[[^\]]*\])
  | (?P<op>>=|<=|!=|<>|[=<>+\-*/])
  | (?P<punct>[(),.;])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # word | number | string | op | punct | eof
    value: str
    start: int
    end: int
    complete: bool = True

    def is_word(self, *values):
        return self.kind == "word" and (not values or self.value in values)

    def is_punct(self, value):
        return self.kind == "punct" and self.value == value

    def is_op(self, *values):
        return self.kind == "op" and (not values or self.value in values)


def _read_string(text, start):
    quote = text[start]
    i = start + 1
    chars = []
    while i < len(text):
        ch = text[i]
        if ch == quote:
            if i + 1 < len(text) and text[i + 1] == quote:
                chars.append(quote)
                i += 2
                continue
            return "".join(chars), i + 1, True
        chars.append(ch)
        i += 1
    return "".join(chars), len(text), False


def tokenize(text: str, partial: bool = False) -> list[Token]:
    """Split ``text`` into tokens.

    With ``partial=True`` an unterminated string at the end is returned as an
    incomplete token instead of raising.
    """
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch in "'\"":
            value, end, closed = _read_string(text, pos)
            if not closed and not partial:
                raise SqlSyntaxError("unterminated string literal", pos)
            tokens.append(Token("string", value, pos, end, closed))
            pos = end
            continue
        if ch in "`[" and ("`" if ch == "`" else "]") not in text[pos + 1:]:
            if not partial:
                raise SqlSyntaxError("unterminated quoted identifier", pos)
            tokens.append(Token("word", text[pos + 1:].lower(), pos, n, False))
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None and partial and ch == "!" and pos == n - 1:
            tokens.append(Token("op", "!", pos, n, False))  # first half of !=
            break
        if m is None:
            raise SqlSyntaxError(f"unexpected character {ch!r}", pos)
        kind = m.lastgroup
        raw = m.group()
        if kind == "ws":
            pass
        elif kind == "word":
            tokens.append(Token("word", raw.lower(), pos, m.end()))
        elif kind == "quoted":
            tokens.append(Token("word", raw[1:-1].lower(), pos, m.end()))
        elif kind == "op":
            tokens.append(Token("op", "!=" if raw == "<>" else raw, pos, m.end()))
        else:
            tokens.append(Token(kind, raw, pos, m.end()))
        pos = m.end()
    return tokens
