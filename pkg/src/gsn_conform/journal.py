"""Append-only challenge/resolution journals (``.journal`` files).

One record per line::

    challenge CG1 target G6 origin manual "Credentials dropped for security"
    challenge CG_auto_1 target G6 origin change DataItemRemoved "password" activity UpdateAttendance "..."
    resolve CG1 kind rebuttal "Session codes identify the student" refs studentcheck_v2b
"""

from __future__ import annotations

import dataclasses
import os
from collections.abc import Iterable

from .argument import is_element_id
from .engine import ChallengeRecord, ChallengeResolution, InvalidChallenge, ResolutionKind
from .sysmodel import ChangeKind, ModelChange
from .syntax import (
    COMMA,
    STRING,
    WORD,
    Abort,
    ParseDiagnostic,
    ParseError,
    Token,
    TokenStream,
    decode_source,
    diag,
    quote,
    tokenize,
)


@dataclasses.dataclass(frozen=True)
class Journal:
    challenges: tuple[ChallengeRecord, ...] = ()
    resolutions: tuple[ChallengeResolution, ...] = ()


def _ident(ts: TokenStream, what: str) -> Token:
    tok = ts.expect(WORD, what)
    if not is_element_id(tok.value):
        raise Abort(diag(tok.line, tok.column, "INVALID_ID", f"invalid id {tok.value!r}"))
    return tok


def _keyword(ts: TokenStream, word: str) -> Token:
    tok = ts.peek()
    if tok is None:
        raise Abort(ts.eof_diag(f"'{word}'"))
    if tok.kind != WORD or tok.value != word:
        raise Abort(diag(tok.line, tok.column, "UNEXPECTED_TOKEN", f"expected '{word}', found {tok.describe()}"))
    return ts.next()


def _text(ts: TokenStream, what: str) -> Token:
    tok = ts.next()
    if tok is None:
        raise Abort(ts.eof_diag(what))
    if tok.kind not in (WORD, STRING):
        raise Abort(diag(tok.line, tok.column, "UNEXPECTED_TOKEN", f"expected {what}, found {tok.describe()}"))
    return tok


def _challenge(ts: TokenStream) -> tuple[Token, ChallengeRecord]:
    cid = _ident(ts, "a challenge id")
    _keyword(ts, "target")
    target = _ident(ts, "a target element id")
    _keyword(ts, "origin")
    origin_tok = ts.expect(WORD, "'manual' or 'change'")
    origin = None
    if origin_tok.value == "change":
        kind_tok = ts.expect(WORD, "a change kind")
        try:
            kind = ChangeKind(kind_tok.value)
        except ValueError:
            raise Abort(diag(kind_tok.line, kind_tok.column, "INVALID_VALUE",
                             f"unknown change kind {kind_tok.value!r}")) from None
        subject = _text(ts, "the changed subject").value
        activity = None
        if ts.accept(WORD, "activity"):
            activity = _ident(ts, "an activity name").value
        origin = ModelChange(kind, subject, activity)
    elif origin_tok.value != "manual":
        raise Abort(diag(origin_tok.line, origin_tok.column, "INVALID_VALUE",
                         f"origin must be 'manual' or 'change', not {origin_tok.value!r}"))
    rationale = ts.expect(STRING, "a quoted rationale")
    return cid, ChallengeRecord(cid.value, target.value, rationale.value, origin)


def _resolve(ts: TokenStream) -> tuple[Token, ChallengeResolution]:
    cid = _ident(ts, "a challenge id")
    _keyword(ts, "kind")
    kind_tok = ts.expect(WORD, "a resolution kind")
    try:
        kind = ResolutionKind.parse(kind_tok.value)
    except ValueError:
        raise Abort(diag(kind_tok.line, kind_tok.column, "INVALID_VALUE",
                         f"unknown resolution kind {kind_tok.value!r} "
                         "(rebuttal, system_change, additional_argument)")) from None
    rationale = ts.expect(STRING, "a quoted rationale")
    if not rationale.value.strip():
        raise Abort(diag(rationale.line, rationale.column, "INVALID_VALUE", "rationale must not be empty"))
    refs: list[str] = []
    if ts.accept(WORD, "refs"):
        refs.append(_text(ts, "a reference").value)
        while ts.accept(COMMA):
            refs.append(_text(ts, "a reference").value)
    return cid, ChallengeResolution(cid.value, kind, rationale.value, tuple(refs))


def parse_journal(text: str | bytes) -> Journal:
    """Parse a journal. Raises ParseError with positioned diagnostics."""
    source, problems = decode_source(text)
    if problems:
        raise ParseError(problems)
    tokens, problems = tokenize(source)
    lines: dict[int, list[Token]] = {}
    for tok in tokens:
        lines.setdefault(tok.line, []).append(tok)

    source_lines = source.split("\n")
    challenges: dict[str, ChallengeRecord] = {}
    resolutions: dict[str, ChallengeResolution] = {}
    for line_tokens in lines.values():
        ts = TokenStream(line_tokens, source)
        # A record ends with its line.
        ts.eof_line = line_tokens[0].line
        ts.eof_column = len(source_lines[ts.eof_line - 1]) + 1
        head = ts.next()
        try:
            if head.kind == WORD and head.value == "challenge":
                cid, record = _challenge(ts)
                if record.id in challenges:
                    raise Abort(diag(cid.line, cid.column, "DUPLICATE_ID", f"challenge {record.id} recorded twice"))
                challenges[record.id] = record
            elif head.kind == WORD and head.value == "resolve":
                cid, resolution = _resolve(ts)
                if resolution.challenge not in challenges:
                    raise Abort(diag(cid.line, cid.column, "UNKNOWN_CHALLENGE",
                                     f"no earlier challenge {resolution.challenge}"))
                if resolution.challenge in resolutions:
                    raise Abort(diag(cid.line, cid.column, "ALREADY_RESOLVED",
                                     f"challenge {resolution.challenge} is already resolved"))
                resolutions[resolution.challenge] = resolution
            else:
                code = "UNKNOWN_KEYWORD" if head.kind == WORD else "UNEXPECTED_TOKEN"
                raise Abort(diag(head.line, head.column, code,
                                 f"expected 'challenge' or 'resolve', found {head.describe()}"))
            extra = ts.peek()
            if extra is not None:
                raise Abort(diag(extra.line, extra.column, "UNEXPECTED_TOKEN",
                                 f"unexpected {extra.describe()} after the record"))
        except Abort as exc:
            problems.append(exc.diagnostic)
        except (InvalidChallenge, ValueError) as exc:
            problems.append(diag(head.line, head.column, "INVALID_VALUE", str(exc)))
    if problems:
        raise ParseError(problems)
    return Journal(tuple(challenges.values()), tuple(resolutions.values()))


def format_challenge(record: ChallengeRecord) -> str:
    if record.origin is None:
        origin = "manual"
    else:
        origin = f"change {record.origin.kind.value} {quote(record.origin.subject)}"
        if record.origin.activity:
            origin += f" activity {record.origin.activity}"
    return f"challenge {record.id} target {record.target} origin {origin} {quote(record.rationale)}"


def format_resolution(resolution: ChallengeResolution) -> str:
    line = f"resolve {resolution.challenge} kind {resolution.kind.keyword} {quote(resolution.rationale)}"
    if resolution.refs:
        line += " refs " + ", ".join(quote(r) for r in resolution.refs)
    return line


def format_journal(journal: Journal) -> str:
    lines = [format_challenge(c) for c in journal.challenges]
    lines += [format_resolution(r) for r in journal.resolutions]
    return "".join(line + "\n" for line in lines)


def append_records(path: str | os.PathLike, records: Iterable[ChallengeRecord | ChallengeResolution]) -> int:
    """Append records to ``path`` without touching existing lines. Returns the count written."""
    lines = [
        format_challenge(r) if isinstance(r, ChallengeRecord) else format_resolution(r) for r in records
    ]
    if not lines:
        return 0
    prefix = ""
    if os.path.exists(path) and os.path.getsize(path) > 0:
        with open(path, "rb") as fh:
            fh.seek(-1, os.SEEK_END)
            if fh.read(1) != b"\n":
                prefix = "\n"
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(prefix + "".join(line + "\n" for line in lines))
    return len(lines)
