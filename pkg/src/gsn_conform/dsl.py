"""Reader and canonical writer for ``.gsn`` argument files.

A document is a sequence of element blocks::

    goal G1 "Processing ... conforms to the data minimisation principle" {
      annotate principle: data_minimisation
      in_context_of C1, C2
      supported_by S1
    }
    solution Sn1 "Justification report" {
      evidence justification_report "reports/sn1.pdf" sha256:<hex>
    }

plus an optional ``title "..."`` line and ``#`` comments. Blocks may refer
to elements declared further down.
"""

from __future__ import annotations

import dataclasses

from .argument import (
    KIND_ORDER,
    ArgumentGraph,
    ElementKind,
    EvidenceKind,
    EvidenceRef,
    GsnElement,
    InvalidElement,
    RelationKind,
    Relationship,
    is_element_id,
    relationship_violation,
    support_cycles,
)
from .syntax import (
    COLON,
    LBRACE,
    RBRACE,
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

KEYWORDS = {kind.keyword: kind for kind in ElementKind}

_K = ElementKind
_ALLOWED = {
    "supported_by": {_K.GOAL, _K.STRATEGY},
    "in_context_of": {_K.GOAL, _K.STRATEGY},
    "undeveloped": {_K.GOAL, _K.STRATEGY},
    "challenges": {_K.CHALLENGE},
    "evidence": {_K.SOLUTION},
    "annotate": set(ElementKind),
}
_EDGE_PROPERTIES = {
    "supported_by": RelationKind.SUPPORTED_BY,
    "in_context_of": RelationKind.IN_CONTEXT_OF,
    "challenges": RelationKind.CHALLENGES,
}
_PROPERTY_ORDER = ("undeveloped", "annotate", "in_context_of", "supported_by", "challenges", "evidence")


@dataclasses.dataclass
class _Block:
    kind: ElementKind
    id_token: Token
    statement: Token
    undeveloped: bool = False
    annotations: dict[str, set[str]] = dataclasses.field(default_factory=dict)
    evidence: EvidenceRef | None = None
    evidence_token: Token | None = None
    edges: list[tuple[RelationKind, Token]] = dataclasses.field(default_factory=list)


class _Reader:
    def __init__(self, tokens: list[Token], text: str):
        self.ts = TokenStream(tokens, text)
        self.problems: list[ParseDiagnostic] = []
        self.blocks: list[_Block] = []
        self.title: str | None = None

    def report(self, tok: Token, code: str, message: str) -> None:
        self.problems.append(diag(tok.line, tok.column, code, message))

    def at_block_start(self) -> bool:
        ts = self.ts
        first, second = ts.peek(), ts.peek(1)
        if first is None or first.kind != WORD or second is None:
            return False
        if first.value == "title":
            return second.kind == STRING
        third = ts.peek(2)
        return first.value in KEYWORDS and second.kind == WORD and third is not None and third.kind == STRING

    def resync(self, start: int) -> None:
        ts = self.ts
        if ts.pos == start:
            ts.next()
        while ts.peek() is not None and not self.at_block_start():
            ts.next()

    def run(self) -> None:
        ts = self.ts
        while (tok := ts.peek()) is not None:
            start = ts.pos
            try:
                if tok.kind == WORD and tok.value == "title":
                    ts.next()
                    text = ts.expect(STRING, "a quoted title")
                    if self.title is not None:
                        self.report(tok, "DUPLICATE_PROPERTY", "title given twice")
                    else:
                        self.title = text.value
                elif tok.kind == WORD and tok.value in KEYWORDS:
                    self.block()
                elif tok.kind == WORD:
                    raise Abort(
                        diag(tok.line, tok.column, "UNKNOWN_KEYWORD",
                             f"unknown keyword {tok.value!r}; expected an element kind or 'title'")
                    )
                else:
                    raise Abort(diag(tok.line, tok.column, "UNEXPECTED_TOKEN", f"unexpected {tok.describe()}"))
            except Abort as exc:
                self.problems.append(exc.diagnostic)
                self.resync(start)

    def block(self) -> None:
        ts = self.ts
        kind = KEYWORDS[ts.next().value]
        id_tok = ts.expect(WORD, "an element id")
        if not is_element_id(id_tok.value):
            raise Abort(diag(id_tok.line, id_tok.column, "INVALID_ID", f"invalid element id {id_tok.value!r}"))
        statement = ts.expect(STRING, "a quoted statement")
        ts.expect(LBRACE, "'{'")
        block = _Block(kind, id_tok, statement)
        while True:
            tok = ts.peek()
            if tok is None:
                self.problems.append(ts.eof_diag(f"'}}' closing {id_tok.value}"))
                break
            if tok.kind == RBRACE:
                ts.next()
                break
            if self.at_block_start():
                self.report(tok, "UNEXPECTED_TOKEN", f"missing '}}' closing {id_tok.value}")
                break
            start = ts.pos
            try:
                self.prop(block)
            except Abort as exc:
                self.problems.append(exc.diagnostic)
                if ts.pos == start:
                    ts.next()
                while (t := ts.peek()) is not None and t.kind != RBRACE and not self.at_block_start():
                    if t.kind == WORD and t.value in _ALLOWED:
                        break
                    ts.next()
        self.blocks.append(block)

    def prop(self, block: _Block) -> None:
        ts = self.ts
        tok = ts.next()
        if tok.kind != WORD:
            raise Abort(diag(tok.line, tok.column, "UNEXPECTED_TOKEN", f"expected a property, found {tok.describe()}"))
        name = tok.value
        if name not in _ALLOWED:
            raise Abort(diag(tok.line, tok.column, "UNKNOWN_KEYWORD", f"unknown property {name!r}"))
        wrong_kind = block.kind not in _ALLOWED[name]
        if wrong_kind:
            self.report(tok, "WRONG_KIND_PROPERTY", f"{name!r} is not allowed on a {block.kind.keyword}")

        if name in _EDGE_PROPERTIES:
            targets = ts.word_list("an element id")
            for target in targets:
                if not is_element_id(target.value):
                    raise Abort(diag(target.line, target.column, "INVALID_ID", f"invalid element id {target.value!r}"))
            if not wrong_kind:
                block.edges.extend((_EDGE_PROPERTIES[name], t) for t in targets)
        elif name == "undeveloped":
            if block.undeveloped:
                self.report(tok, "DUPLICATE_PROPERTY", f"{block.id_token.value} is already marked undeveloped")
            block.undeveloped = block.undeveloped or not wrong_kind
        elif name == "annotate":
            key = ts.expect(WORD, "an annotation key")
            if not is_element_id(key.value):
                raise Abort(diag(key.line, key.column, "INVALID_VALUE", f"invalid annotation key {key.value!r}"))
            ts.expect(COLON, "':' after the annotation key")
            values = ts.word_list("an annotation token")
            block.annotations.setdefault(key.value, set()).update(v.value for v in values)
        else:
            evidence = self.evidence(block)
            if wrong_kind:
                return
            if block.evidence is not None:
                self.report(tok, "DUPLICATE_PROPERTY", f"{block.id_token.value} already has evidence")
            else:
                block.evidence = evidence
                block.evidence_token = tok

    def evidence(self, block: _Block) -> EvidenceRef:
        ts = self.ts
        kind_tok = ts.expect(WORD, "an evidence kind")
        try:
            kind = EvidenceKind(kind_tok.value)
        except ValueError:
            choices = ", ".join(k.value for k in EvidenceKind)
            raise Abort(diag(kind_tok.line, kind_tok.column, "INVALID_VALUE",
                             f"unknown evidence kind {kind_tok.value!r} (one of {choices})")) from None
        locator = ts.next()
        if locator is None:
            raise Abort(ts.eof_diag("an evidence locator"))
        if locator.kind not in (WORD, STRING) or not locator.value:
            raise Abort(diag(locator.line, locator.column, "INVALID_VALUE", "evidence locator must be a non-empty path or URI"))
        digest = algorithm = None
        nxt = ts.peek()
        if ts.accept(WORD, "-"):
            pass
        elif nxt is not None and nxt.kind == WORD and nxt.value not in _ALLOWED and nxt.value != "as":
            algo_tok = ts.next()
            ts.expect(COLON, "':' between digest algorithm and value")
            hex_tok = ts.expect(WORD, "a hex digest")
            algorithm, digest = algo_tok.value, hex_tok.value
            if not is_element_id(algorithm):
                raise Abort(diag(algo_tok.line, algo_tok.column, "INVALID_VALUE", f"invalid digest algorithm {algorithm!r}"))
            if len(digest) < 32 or len(digest) % 2 or digest.strip("0123456789abcdef"):
                raise Abort(diag(hex_tok.line, hex_tok.column, "INVALID_VALUE",
                                 "digest must be lowercase hex of even length, at least 32 characters"))
        ref_id = block.id_token.value
        if ts.accept(WORD, "as"):
            id_tok = ts.expect(WORD, "an evidence id")
            if not is_element_id(id_tok.value):
                raise Abort(diag(id_tok.line, id_tok.column, "INVALID_ID", f"invalid evidence id {id_tok.value!r}"))
            ref_id = id_tok.value
        return EvidenceRef(ref_id, kind, locator.value, digest, algorithm)


def parse(text: str | bytes) -> ArgumentGraph:
    """Parse ``.gsn`` source into an ArgumentGraph.

    Raises ParseError carrying every positioned diagnostic; nothing else
    escapes, whatever the input.
    """
    source, problems = decode_source(text)
    if problems:
        raise ParseError(problems)
    tokens, problems = tokenize(source)
    reader = _Reader(tokens, source)
    reader.run()

    elements: dict[str, GsnElement] = {}
    owners: dict[str, _Block] = {}
    for block in reader.blocks:
        eid = block.id_token.value
        if eid in elements or eid in owners:
            reader.report(block.id_token, "DUPLICATE_ID", f"element {eid} is already declared")
            continue
        owners[eid] = block
        if not block.statement.value.strip():
            reader.report(block.statement, "INVALID_VALUE", f"{eid}: statement must not be empty")
            continue
        try:
            elements[eid] = GsnElement(
                eid,
                block.kind,
                block.statement.value,
                undeveloped=block.undeveloped,
                annotations=block.annotations,
                evidence=block.evidence,
            )
        except InvalidElement as exc:
            reader.report(block.id_token, "INVALID_VALUE", str(exc))

    relationships: list[Relationship] = []
    edge_tokens: dict[Relationship, Token] = {}
    for block in reader.blocks:
        source_id = block.id_token.value
        if owners.get(source_id) is not block or source_id not in elements:
            continue
        for kind, tok in block.edges:
            target = tok.value
            if target not in owners:
                reader.report(tok, "UNRESOLVED_ID", f"{source_id} refers to undeclared element {target}")
                continue
            if target not in elements:
                continue
            rel = Relationship(kind, source_id, target)
            if target == source_id:
                reader.report(tok, "KIND_VIOLATION", f"{source_id} cannot refer to itself")
                continue
            problem = relationship_violation(kind, elements[source_id].kind, elements[target].kind)
            if problem:
                reader.report(tok, "KIND_VIOLATION", f"{kind.value}({source_id} -> {target}): {problem}")
                continue
            if rel in edge_tokens:
                reader.report(tok, "DUPLICATE_RELATIONSHIP", f"{kind.value}({source_id} -> {target}) declared twice")
                continue
            edge_tokens[rel] = tok
            relationships.append(rel)

    graph = ArgumentGraph(elements.values(), relationships, reader.title or "")
    for cycle in support_cycles(graph):
        members = set(cycle)
        where = min(
            (t.line, t.column)
            for rel, t in edge_tokens.items()
            if rel.kind is RelationKind.SUPPORTED_BY and rel.source in members and rel.target in members
        )
        reader.problems.append(diag(*where, "CYCLE", "supported-by cycle through " + ", ".join(cycle)))

    problems.extend(reader.problems)
    if problems:
        raise ParseError(problems)
    return graph


def serialize(graph: ArgumentGraph) -> str:
    """Canonical ``.gsn`` text: kinds in fixed order, ids sorted, properties in fixed order.

    Relationships whose source is not an element of the graph are dropped.
    """
    rank = {kind: i for i, kind in enumerate(KIND_ORDER)}
    out: dict[str, dict[RelationKind, list[str]]] = {}
    for rel in set(graph.relationships):
        out.setdefault(rel.source, {}).setdefault(rel.kind, []).append(rel.target)

    chunks = []
    if graph.title:
        chunks.append(f"title {quote(graph.title)}\n")
    for element in sorted(graph.elements.values(), key=lambda e: (rank[e.kind], e.id)):
        props = []
        edges = out.get(element.id, {})
        for name in _PROPERTY_ORDER:
            if name == "undeveloped" and element.undeveloped:
                props.append("undeveloped")
            elif name == "annotate":
                for key, tokens in sorted(element.annotations.items()):
                    props.append(f"annotate {key}: {', '.join(sorted(tokens))}")
            elif name in _EDGE_PROPERTIES and edges.get(_EDGE_PROPERTIES[name]):
                props.append(f"{name} {', '.join(sorted(edges[_EDGE_PROPERTIES[name]]))}")
            elif name == "evidence" and element.evidence is not None:
                ev = element.evidence
                digest = f"{ev.algorithm}:{ev.digest}" if ev.digest else "-"
                line = f"evidence {ev.kind.value} {quote(ev.locator)} {digest}"
                if ev.id != element.id:
                    line += f" as {ev.id}"
                props.append(line)
        head = f"{element.kind.keyword} {element.id} {quote(element.statement)}"
        if props:
            body = "".join(f"  {p}\n" for p in props)
            chunks.append(f"{head} {{\n{body}}}\n")
        else:
            chunks.append(f"{head} {{}}\n")
    return "\n".join(chunks)
