"""Tokenizer for the query language."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import QuerySyntaxError

KEYWORDS = {
    "MATCH", "WHERE", "RETURN", "ORDER", "BY", "LIMIT", "SKIP", "CREATE", "CALL", "YIELD",
    "AND", "OR", "XOR", "NOT", "ASC", "DESC", "ASCENDING", "DESCENDING", "TRUE", "FALSE",
    "NULL", "AS", "VECTOR", "INDEX", "ON", "OPTIONS", "ARRAY", "EXPLAIN", "IS", "DISTINCT",
}

# order matters: longest punctuation first
_PUNCT = ["->", "<-", "<=", ">=", "<>", "!=", "..", "=", "<", ">", "(", ")", "[", "]", "{", "}",
          ":", ",", ".", "-", "+", "*", "/", "%", ";", "|"]

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<float>\d+\.\d+(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+)
  | (?P<int>\d+)
  | (?P<string>'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*")
  | (?P<param>\$[A-Za-z_][A-Za-z_0-9]*)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*|`[^`]+`)
  | (?P<punct>""" + "|".join(re.escape(p) for p in _PUNCT) + r""")
""", re.VERBOSE)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", "'": "'", '"': '"'}


@dataclass(frozen=True)
class Token:
    kind: str      # KEYWORD, IDENT, INT, FLOAT, STRING, PARAM, PUNCT, EOF
    value: object
    offset: int
    text: str

    def is_kw(self, *words: str) -> bool:
        return self.kind == "KEYWORD" and self.value in words

    def is_punct(self, *marks: str) -> bool:
        return self.kind == "PUNCT" and self.value in marks

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        return repr(self.text)


def line_col(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def syntax_error(text: str, offset: int, message: str, expected=()) -> QuerySyntaxError:
    line, col = line_col(text, offset)
    return QuerySyntaxError(message, offset, line, col, sorted(set(expected)))


def _unescape(body: str) -> str:
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(_ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise syntax_error(text, pos, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        raw = m.group()
        if kind == "float":
            tokens.append(Token("FLOAT", float(raw), pos, raw))
        elif kind == "int":
            tokens.append(Token("INT", int(raw), pos, raw))
        elif kind == "string":
            tokens.append(Token("STRING", _unescape(raw[1:-1]), pos, raw))
        elif kind == "param":
            tokens.append(Token("PARAM", raw[1:], pos, raw))
        elif kind == "ident":
            if raw.startswith("`"):
                tokens.append(Token("IDENT", raw[1:-1], pos, raw))
            elif raw.upper() in KEYWORDS:
                tokens.append(Token("KEYWORD", raw.upper(), pos, raw))
            else:
                tokens.append(Token("IDENT", raw, pos, raw))
        elif kind == "punct":
            tokens.append(Token("PUNCT", raw, pos, raw))
        pos = m.end()
    # unterminated string literals fall through to "unexpected character"
    tokens.append(Token("EOF", None, n, ""))
    return tokens
