"""Tokenizer and diagnostics shared by the ``.gsn``, ``.sys`` and ``.journal`` readers."""

from __future__ import annotations

import dataclasses
from collections.abc import Iterable

# Closed set of diagnostic codes emitted by the readers.
DIAGNOSTIC_CODES = {
    "INVALID_ENCODING": "input is not valid UTF-8",
    "MALFORMED_QUOTE": "unterminated string or unknown escape sequence",
    "UNKNOWN_KEYWORD": "unrecognised block or property keyword",
    "UNEXPECTED_TOKEN": "token not allowed at this point",
    "UNEXPECTED_EOF": "input ended inside a block or statement",
    "INVALID_ID": "identifier is not letters/digits/underscore",
    "DUPLICATE_ID": "identifier or name declared twice",
    "DUPLICATE_PROPERTY": "single-valued property given twice",
    "UNRESOLVED_ID": "reference to an element that is never declared",
    "WRONG_KIND_PROPERTY": "property not allowed on this element kind",
    "INVALID_VALUE": "malformed value (evidence kind, digest, token, ...)",
    "KIND_VIOLATION": "relationship between element kinds that GSN forbids",
    "DUPLICATE_RELATIONSHIP": "the same relationship is declared twice",
    "CYCLE": "supported-by edges form a cycle",
    "UNRESOLVED_NODE": "flow or activity names an undeclared node",
    "UNRESOLVED_ITEM": "flow or activity names an undeclared data item",
    "MISSING_PROPERTY": "required property absent (version, purposes, ...)",
    "UNKNOWN_CHALLENGE": "journal resolves a challenge it never declared",
    "ALREADY_RESOLVED": "journal resolves the same challenge twice",
}


@dataclasses.dataclass(frozen=True, order=True)
class SourcePosition:
    line: int
    column: int

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1:
            raise ValueError(f"positions are 1-based, got {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclasses.dataclass(frozen=True, order=True)
class ParseDiagnostic:
    position: SourcePosition
    code: str
    message: str

    def __post_init__(self) -> None:
        if self.code not in DIAGNOSTIC_CODES:
            raise ValueError(f"undocumented diagnostic code {self.code!r}")
        if not self.message:
            raise ValueError("diagnostic message must be non-empty")

    def __str__(self) -> str:
        return f"{self.position}: {self.code}: {self.message}"

    def to_dict(self) -> dict:
        return {
            "line": self.position.line,
            "column": self.position.column,
            "code": self.code,
            "message": self.message,
        }


class ParseError(Exception):
    """Raised by the readers; carries every diagnostic found."""

    def __init__(self, diagnostics: Iterable[ParseDiagnostic], source: str | None = None):
        self.diagnostics = sorted(set(diagnostics))
        self.source = source
        head = self.diagnostics[0] if self.diagnostics else "no diagnostics"
        more = len(self.diagnostics) - 1
        super().__init__(f"{head}" + (f" (+{more} more)" if more > 0 else ""))


def diag(line: int, column: int, code: str, message: str) -> ParseDiagnostic:
    return ParseDiagnostic(SourcePosition(line, column), code, message)


def decode_source(data: str | bytes) -> tuple[str, list[ParseDiagnostic]]:
    """UTF-8 decode (BOM stripped) and normalise CRLF to LF."""
    if isinstance(data, (bytes, bytearray, memoryview)):
        raw = bytes(data)
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            before = raw[: exc.start]
            line = before.count(b"\n") + 1
            line_start = before.rfind(b"\n") + 1
            column = len(before[line_start:].decode("utf-8", errors="replace")) + 1
            return "", [diag(line, column, "INVALID_ENCODING", f"invalid UTF-8 byte at offset {exc.start}")]
    else:
        text = data
    if text.startswith("\ufeff"):
        text = text[1:]
    return text.replace("\r\n", "\n"), []


WORD, STRING, LBRACE, RBRACE, COMMA, COLON, ARROW = (
    "word", "string", "{", "}", ",", ":", "->",
)
_PUNCT = {"{": LBRACE, "}": RBRACE, ",": COMMA, ":": COLON}
_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t", "r": "\r"}
_STOP = set('{},:#"')


@dataclasses.dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    column: int

    def describe(self) -> str:
        return repr(self.value) if self.kind in (WORD, STRING) else f"'{self.kind}'"


def tokenize(text: str) -> tuple[list[Token], list[ParseDiagnostic]]:
    tokens: list[Token] = []
    problems: list[ParseDiagnostic] = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        i, n = 0, len(line)
        while i < n:
            ch = line[i]
            col = i + 1
            if ch.isspace():
                i += 1
            elif ch == "#":
                break
            elif ch in _PUNCT:
                tokens.append(Token(_PUNCT[ch], ch, lineno, col))
                i += 1
            elif line.startswith("->", i):
                tokens.append(Token(ARROW, "->", lineno, col))
                i += 2
            elif ch == '"':
                value, i, problem = _read_string(line, i, lineno)
                if problem:
                    problems.append(problem)
                    break
                tokens.append(Token(STRING, value, lineno, col))
            else:
                j = i
                while j < n and not line[j].isspace() and line[j] not in _STOP and not line.startswith("->", j):
                    j += 1
                tokens.append(Token(WORD, line[i:j], lineno, col))
                i = j
    return tokens, problems


def _read_string(line: str, start: int, lineno: int):
    out = []
    i = start + 1
    while i < len(line):
        ch = line[i]
        if ch == '"':
            return "".join(out), i + 1, None
        if ch == "\\":
            nxt = line[i + 1] if i + 1 < len(line) else ""
            if nxt not in _ESCAPES:
                return "", i, diag(lineno, i + 1, "MALFORMED_QUOTE", f"unknown escape '\\{nxt}'")
            out.append(_ESCAPES[nxt])
            i += 2
            continue
        out.append(ch)
        i += 1
    return "", i, diag(lineno, start + 1, "MALFORMED_QUOTE", "string is not closed on this line")


def quote(text: str) -> str:
    escaped = (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\t", "\\t")
        .replace("\r", "\\r")
    )
    return f'"{escaped}"'


class TokenStream:
    """Cursor over a token list with end-of-input positioned at the last line."""

    def __init__(self, tokens: list[Token], text: str):
        self.tokens = tokens
        self.pos = 0
        lines = text.split("\n")
        self.eof_line = len(lines)
        self.eof_column = len(lines[-1]) + 1

    def peek(self, offset: int = 0) -> Token | None:
        idx = self.pos + offset
        return self.tokens[idx] if idx < len(self.tokens) else None

    def next(self) -> Token | None:
        tok = self.peek()
        if tok is not None:
            self.pos += 1
        return tok

    def at(self, kind: str, value: str | None = None) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == kind and (value is None or tok.value == value)

    def accept(self, kind: str, value: str | None = None) -> Token | None:
        return self.next() if self.at(kind, value) else None

    def eof_diag(self, what: str) -> ParseDiagnostic:
        return diag(self.eof_line, self.eof_column, "UNEXPECTED_EOF", f"input ended, expected {what}")

    def expect(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok is None:
            raise Abort(self.eof_diag(what))
        if tok.kind != kind:
            raise Abort(diag(tok.line, tok.column, "UNEXPECTED_TOKEN", f"expected {what}, found {tok.describe()}"))
        self.pos += 1
        return tok

    def word_list(self, what: str) -> list[Token]:
        items = [self.expect(WORD, what)]
        while self.accept(COMMA):
            items.append(self.expect(WORD, what))
        return items


class Abort(Exception):
    """A statement could not be parsed; the reader records the diagnostic and resyncs."""

    def __init__(self, diagnostic: ParseDiagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic

