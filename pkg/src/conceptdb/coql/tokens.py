"""COQL lexer: maximal-munch tokens with 1-based source positions."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import LexError

KEYWORDS = frozenset({
    "CONCEPT", "IDENTITY", "ENTITY", "IN", "CREATE", "TABLE",
    "CUBE", "WHERE", "BODY", "RETURN", "AND", "OR", "NOT",
    "STARTSWITH", "SUM", "COUNT", "SELECT", "FROM",
    "super", "this",
})

# Alternate spellings of the inference arrows collapse to one canonical
# operator so downstream code sees a single token text.
_NORMALIZE = {
    "<--*->": "<-*->",
    "<-*>": "<-*->",
    "<*->": "<-*->",
    "<--*(": "<-*(",
}

_OPERATORS = [
    "<--*->", "<--*(",
    "<-*->", "<-*(",
    ")*->", "<-*>", "<*->",
    "->", "<-", "==", "!=", "<=", ">=",
    "=", "<", ">", "|", "+", "-", "*", "/",
]

_PUNCTUATION = ".,(){}"

KW = "keyword"
IDENT = "identifier"
NUMBER = "number"
STRING = "string"
OP = "operator"
PUNCT = "punctuation"
EOF = "eof"


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int
    value: object = None

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.column})"


def tokenize(text: str, start_line: int = 1) -> list[Token]:
    """Lex COQL text; `// ...` comments are skipped; ends with an EOF token."""
    tokens: list[Token] = []
    i = 0
    line = start_line
    col = 1
    n = len(text)

    def advance(k):
        nonlocal i, line, col
        for _ in range(k):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                advance(1)
            continue
        tline, tcol = line, col
        if ch == "'":
            j = i + 1
            while j < n and text[j] not in ("'", "\n"):
                j += 1
            if j >= n or text[j] != "'":
                raise LexError("unterminated string literal", tline, tcol)
            value = text[i + 1:j]
            advance(j + 1 - i)
            tokens.append(Token(STRING, f"'{value}'", tline, tcol, value))
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            is_double = False
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                is_double = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            raw = text[i:j]
            advance(j - i)
            value = float(raw) if is_double else int(raw)
            tokens.append(Token(NUMBER, raw, tline, tcol, value))
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            advance(j - i)
            kind = KW if word in KEYWORDS else IDENT
            tokens.append(Token(kind, word, tline, tcol))
            continue
        for op in _OPERATORS:
            if text.startswith(op, i):
                advance(len(op))
                tokens.append(Token(OP, _NORMALIZE.get(op, op), tline, tcol))
                break
        else:
            if ch in _PUNCTUATION:
                advance(1)
                tokens.append(Token(PUNCT, ch, tline, tcol))
            else:
                raise LexError(f"illegal character {ch!r}", tline, tcol)
    tokens.append(Token(EOF, "", line, col))
    return tokens
