"""Data-flow system models (``.sys`` files) and name-based version diffing.

Example::

    title "StudentCheck: Update Attendance"
    version "1"
    entity Student
    process Authentication
    store UserDatabase
    item username personal note "identifies the student"
    flow Student -> Authentication : username, password
    activity UpdateAttendance {
      processes Authentication
      purposes attendance_monitoring
      items username
      description "Confirms a student's attendance at a session."
    }
"""

from __future__ import annotations

import dataclasses
import enum
from collections.abc import Iterable, Mapping
from types import MappingProxyType

from .argument import Finding, Severity, is_element_id, is_token, sort_findings
from .syntax import (
    ARROW,
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


class NodeKind(str, enum.Enum):
    EXTERNAL_ENTITY = "ExternalEntity"
    PROCESS = "Process"
    DATA_STORE = "DataStore"


_NODE_KEYWORDS = {
    "entity": NodeKind.EXTERNAL_ENTITY,
    "process": NodeKind.PROCESS,
    "store": NodeKind.DATA_STORE,
}
_KEYWORD_FOR = {kind: kw for kw, kind in _NODE_KEYWORDS.items()}
_TOP_LEVEL = {"title", "version", "item", "flow", "activity", *_NODE_KEYWORDS}
_ACTIVITY_PROPS = ("processes", "purposes", "items", "description")


@dataclasses.dataclass(frozen=True)
class DataItem:
    name: str
    personal_data: bool = False
    identifiability_note: str | None = None


@dataclasses.dataclass(frozen=True)
class Node:
    name: str
    kind: NodeKind


@dataclasses.dataclass(frozen=True)
class DataFlow:
    source: str
    target: str
    items: frozenset[str]

    @property
    def key(self) -> str:
        return f"{self.source}->{self.target}"


@dataclasses.dataclass(frozen=True)
class ProcessingActivity:
    name: str
    processes: frozenset[str]
    purposes: frozenset[str]
    data_items: frozenset[str]
    description: str = ""


@dataclasses.dataclass(frozen=True)
class SystemModel:
    title: str
    version: str
    nodes: tuple[Node, ...] = ()
    data_items: tuple[DataItem, ...] = ()
    flows: tuple[DataFlow, ...] = ()
    activities: tuple[ProcessingActivity, ...] = ()

    def __post_init__(self) -> None:
        # Canonical order so equal models compare equal regardless of source order.
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.name)))
        object.__setattr__(self, "data_items", tuple(sorted(self.data_items, key=lambda i: i.name)))
        object.__setattr__(self, "flows", tuple(sorted(self.flows, key=lambda f: (f.source, f.target))))
        object.__setattr__(self, "activities", tuple(sorted(self.activities, key=lambda a: a.name)))
        problems = model_problems(self)
        if problems:
            raise ValueError("invalid system model: " + "; ".join(problems))

    def node(self, name: str) -> Node | None:
        return next((n for n in self.nodes if n.name == name), None)

    def activity(self, name: str) -> ProcessingActivity | None:
        return next((a for a in self.activities if a.name == name), None)

    @property
    def item_names(self) -> frozenset[str]:
        return frozenset(i.name for i in self.data_items)

    @property
    def purposes(self) -> frozenset[str]:
        return frozenset(p for a in self.activities for p in a.purposes)


def model_problems(model: SystemModel) -> list[str]:
    """Cross-reference violations; empty for a valid model."""
    problems = []
    if not model.version:
        problems.append("version must not be empty")
    names = [n.name for n in model.nodes]
    items = [i.name for i in model.data_items]
    for label, seq in (("node", names), ("data item", items), ("activity", [a.name for a in model.activities])):
        dupes = sorted({x for x in seq if seq.count(x) > 1})
        problems.extend(f"duplicate {label} {d}" for d in dupes)
    keys = [f.key for f in model.flows]
    problems.extend(f"duplicate flow {k}" for k in sorted({k for k in keys if keys.count(k) > 1}))
    for name in [*names, *items, *(a.name for a in model.activities)]:
        if not is_element_id(name):
            problems.append(f"invalid name {name!r}")
    kinds = {n.name: n.kind for n in model.nodes}
    declared = set(items)
    for flow in model.flows:
        for end in (flow.source, flow.target):
            if end not in kinds:
                problems.append(f"flow {flow.key}: unknown node {end}")
        if not flow.items:
            problems.append(f"flow {flow.key}: carries no items")
        problems.extend(f"flow {flow.key}: unknown item {i}" for i in sorted(flow.items - declared))
    for act in model.activities:
        for proc in sorted(act.processes):
            if kinds.get(proc) is not NodeKind.PROCESS:
                problems.append(f"activity {act.name}: {proc} is not a declared process")
        problems.extend(f"activity {act.name}: unknown item {i}" for i in sorted(act.data_items - declared))
        if not act.purposes:
            problems.append(f"activity {act.name}: no purposes")
        problems.extend(f"activity {act.name}: bad purpose {p!r}" for p in sorted(act.purposes) if not is_token(p))
    return problems


def lint_model(model: SystemModel) -> list[Finding]:
    """Classic DFD rule warnings (data must pass through a process)."""
    kinds = {n.name: n.kind for n in model.nodes}
    findings = []
    for flow in model.flows:
        pair = (kinds[flow.source], kinds[flow.target])
        if pair == (NodeKind.DATA_STORE, NodeKind.DATA_STORE):
            findings.append(Finding(Severity.WARNING, "STORE_TO_STORE", (flow.source, flow.target),
                                    f"flow {flow.key} connects two data stores"))
        elif pair == (NodeKind.EXTERNAL_ENTITY, NodeKind.EXTERNAL_ENTITY):
            findings.append(Finding(Severity.WARNING, "ENTITY_TO_ENTITY", (flow.source, flow.target),
                                    f"flow {flow.key} connects two external entities"))
    return sort_findings(findings)


class _ModelReader:
    def __init__(self, tokens: list[Token], text: str):
        self.ts = TokenStream(tokens, text)
        self.first_on_line = {i for i, t in enumerate(tokens) if i == 0 or tokens[i - 1].line != t.line}
        self.problems: list[ParseDiagnostic] = []
        self.title: str | None = None
        self.version: Token | None = None
        self.nodes: dict[str, tuple[Node, Token]] = {}
        self.items: dict[str, tuple[DataItem, Token]] = {}
        self.flows: list[tuple[Token, Token, list[Token]]] = []
        self.activities: list[tuple[Token, dict[str, list[Token] | Token]]] = []

    def report(self, tok: Token, code: str, message: str) -> None:
        self.problems.append(diag(tok.line, tok.column, code, message))

    def at_statement(self) -> bool:
        tok = self.ts.peek()
        return tok is not None and tok.kind == WORD and tok.value in _TOP_LEVEL and self.ts.pos in self.first_on_line

    def name(self, what: str) -> Token:
        tok = self.ts.expect(WORD, what)
        if not is_element_id(tok.value):
            raise Abort(diag(tok.line, tok.column, "INVALID_ID", f"invalid name {tok.value!r}"))
        return tok

    def run(self) -> None:
        ts = self.ts
        while (tok := ts.peek()) is not None:
            start = ts.pos
            try:
                self.statement(tok)
            except Abort as exc:
                self.problems.append(exc.diagnostic)
                if ts.pos == start:
                    ts.next()
                while ts.peek() is not None and not self.at_statement():
                    ts.next()

    def statement(self, tok: Token) -> None:
        ts = self.ts
        if tok.kind != WORD:
            raise Abort(diag(tok.line, tok.column, "UNEXPECTED_TOKEN", f"unexpected {tok.describe()}"))
        keyword = tok.value
        if keyword not in _TOP_LEVEL:
            raise Abort(diag(tok.line, tok.column, "UNKNOWN_KEYWORD", f"unknown keyword {keyword!r}"))
        ts.next()
        if keyword == "title":
            value = ts.expect(STRING, "a quoted title")
            if self.title is not None:
                self.report(tok, "DUPLICATE_PROPERTY", "title given twice")
            self.title = value.value
        elif keyword == "version":
            value = ts.next()
            if value is None:
                raise Abort(ts.eof_diag("a version"))
            if value.kind not in (WORD, STRING) or not value.value:
                raise Abort(diag(value.line, value.column, "INVALID_VALUE", "version must be a non-empty token or string"))
            if self.version is not None:
                self.report(tok, "DUPLICATE_PROPERTY", "version given twice")
            self.version = value
        elif keyword in _NODE_KEYWORDS:
            name = self.name("a node name")
            self._declare(name, self.nodes, (Node(name.value, _NODE_KEYWORDS[keyword]), name))
        elif keyword == "item":
            name = self.name("a data item name")
            personal = bool(ts.accept(WORD, "personal"))
            note = None
            if ts.accept(WORD, "note"):
                note = ts.expect(STRING, "a quoted note").value
            self._declare(name, self.items, (DataItem(name.value, personal, note), name))
        elif keyword == "flow":
            source = self.name("the flow source")
            ts.expect(ARROW, "'->'")
            target = self.name("the flow target")
            ts.expect(COLON, "':' before the flow items")
            self.flows.append((source, target, ts.word_list("a data item name")))
        else:
            self.activity()

    def _declare(self, name: Token, table: dict, entry) -> None:
        if name.value in table:
            self.report(name, "DUPLICATE_ID", f"{name.value} is already declared")
        else:
            table[name.value] = entry

    def activity(self) -> None:
        ts = self.ts
        name = self.name("an activity name")
        ts.expect(LBRACE, "'{'")
        props: dict[str, list[Token] | Token] = {}
        while True:
            tok = ts.peek()
            if tok is None:
                self.problems.append(ts.eof_diag(f"'}}' closing activity {name.value}"))
                break
            if tok.kind == RBRACE:
                ts.next()
                break
            if tok.kind != WORD or tok.value not in _ACTIVITY_PROPS:
                if self.at_statement():
                    self.report(tok, "UNEXPECTED_TOKEN", f"missing '}}' closing activity {name.value}")
                    break
                code = "UNKNOWN_KEYWORD" if tok.kind == WORD else "UNEXPECTED_TOKEN"
                raise Abort(diag(tok.line, tok.column, code, f"unexpected {tok.describe()} in activity {name.value}"))
            ts.next()
            if tok.value in props:
                self.report(tok, "DUPLICATE_PROPERTY", f"{tok.value} given twice in activity {name.value}")
            if tok.value == "description":
                props[tok.value] = ts.expect(STRING, "a quoted description")
            else:
                props[tok.value] = ts.word_list(f"a {tok.value[:-1]} name")
        self.activities.append((name, props))

    def build(self) -> SystemModel | None:
        kinds = {name: node.kind for name, (node, _) in self.nodes.items()}
        flows, seen_flows = [], set()
        for source, target, items in self.flows:
            ok = True
            for end in (source, target):
                if end.value not in kinds:
                    self.report(end, "UNRESOLVED_NODE", f"flow endpoint {end.value} is not a declared node")
                    ok = False
            for item in items:
                if item.value not in self.items:
                    self.report(item, "UNRESOLVED_ITEM", f"data item {item.value} is not declared")
                    ok = False
            key = (source.value, target.value)
            if key in seen_flows:
                self.report(source, "DUPLICATE_ID", f"flow {source.value} -> {target.value} declared twice")
                ok = False
            seen_flows.add(key)
            if ok:
                flows.append(DataFlow(source.value, target.value, frozenset(i.value for i in items)))

        activities, seen = [], set()
        for name, props in self.activities:
            if name.value in seen:
                self.report(name, "DUPLICATE_ID", f"activity {name.value} declared twice")
                continue
            seen.add(name.value)
            ok = True
            for proc in props.get("processes", []):
                if kinds.get(proc.value) is not NodeKind.PROCESS:
                    what = "is not a process" if proc.value in kinds else "is not declared"
                    self.report(proc, "UNRESOLVED_NODE", f"process {proc.value} {what}")
                    ok = False
            for item in props.get("items", []):
                if item.value not in self.items:
                    self.report(item, "UNRESOLVED_ITEM", f"data item {item.value} is not declared")
                    ok = False
            if not props.get("purposes"):
                self.report(name, "MISSING_PROPERTY", f"activity {name.value} declares no purposes")
                ok = False
            if ok:
                description = props.get("description")
                activities.append(
                    ProcessingActivity(
                        name.value,
                        frozenset(t.value for t in props.get("processes", [])),
                        frozenset(t.value for t in props["purposes"]),
                        frozenset(t.value for t in props.get("items", [])),
                        description.value if description is not None else "",
                    )
                )
        if self.version is None:
            self.problems.append(diag(1, 1, "MISSING_PROPERTY", "model has no version"))
        if self.problems:
            return None
        return SystemModel(
            self.title or "",
            self.version.value,
            tuple(node for node, _ in self.nodes.values()),
            tuple(item for item, _ in self.items.values()),
            tuple(flows),
            tuple(activities),
        )


def parse_model(text: str | bytes) -> SystemModel:
    """Parse ``.sys`` source. Raises ParseError with positioned diagnostics."""
    source, problems = decode_source(text)
    if problems:
        raise ParseError(problems)
    tokens, problems = tokenize(source)
    reader = _ModelReader(tokens, source)
    reader.run()
    model = reader.build()
    problems.extend(reader.problems)
    if problems or model is None:
        raise ParseError(problems)
    return model


def serialize_model(model: SystemModel) -> str:
    """Canonical ``.sys`` text."""
    lines = []
    if model.title:
        lines.append(f"title {quote(model.title)}")
    lines.append(f"version {quote(model.version)}")
    lines.append("")
    for kind in NodeKind:
        lines.extend(f"{_KEYWORD_FOR[kind]} {n.name}" for n in model.nodes if n.kind is kind)
    lines.append("")
    for item in model.data_items:
        line = f"item {item.name}"
        if item.personal_data:
            line += " personal"
        if item.identifiability_note is not None:
            line += f" note {quote(item.identifiability_note)}"
        lines.append(line)
    lines.append("")
    for flow in model.flows:
        lines.append(f"flow {flow.source} -> {flow.target} : {', '.join(sorted(flow.items))}")
    for act in model.activities:
        lines.append("")
        lines.append(f"activity {act.name} {{")
        if act.processes:
            lines.append(f"  processes {', '.join(sorted(act.processes))}")
        lines.append(f"  purposes {', '.join(sorted(act.purposes))}")
        if act.data_items:
            lines.append(f"  items {', '.join(sorted(act.data_items))}")
        if act.description:
            lines.append(f"  description {quote(act.description)}")
        lines.append("}")
    return "\n".join(lines).rstrip("\n") + "\n"


class ChangeKind(str, enum.Enum):
    DATA_ITEM_ADDED = "DataItemAdded"
    DATA_ITEM_REMOVED = "DataItemRemoved"
    PURPOSE_ADDED = "PurposeAdded"
    PURPOSE_REMOVED = "PurposeRemoved"
    FLOW_ADDED = "FlowAdded"
    FLOW_REMOVED = "FlowRemoved"
    NODE_ADDED = "NodeAdded"
    NODE_REMOVED = "NodeRemoved"
    ACTIVITY_CHANGED = "ActivityChanged"

    @property
    def inverse(self) -> ChangeKind:
        if self.value.endswith("Added"):
            return ChangeKind(self.value[: -len("Added")] + "Removed")
        if self.value.endswith("Removed"):
            return ChangeKind(self.value[: -len("Removed")] + "Added")
        return self


_CHANGE_RANK = {kind: i for i, kind in enumerate(ChangeKind)}


@dataclasses.dataclass(frozen=True)
class ModelChange:
    kind: ChangeKind
    subject: str
    activity: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ChangeKind(self.kind))

    def sort_key(self) -> tuple:
        return (_CHANGE_RANK[self.kind], self.subject, self.activity or "")

    def inverted(self) -> ModelChange:
        return ModelChange(self.kind.inverse, self.subject, self.activity)

    def describe(self) -> str:
        verb = {"Added": "added", "Removed": "removed"}
        k = self.kind.value
        where = f" in activity {self.activity}" if self.activity else ""
        if self.kind is ChangeKind.ACTIVITY_CHANGED:
            return f"processing activity {self.subject} changed"
        for noun, prefix in (("data item", "DataItem"), ("purpose", "Purpose"), ("flow", "Flow"), ("node", "Node")):
            if k.startswith(prefix):
                return f"{noun} {self.subject} {verb[k[len(prefix):]]}{where}"
        return f"{k} {self.subject}{where}"

    def __str__(self) -> str:
        suffix = f", activity={self.activity}" if self.activity else ""
        return f"{self.kind.value}({self.subject}{suffix})"


def _added_removed(old: Iterable[str], new: Iterable[str], added: ChangeKind, activity=None):
    old, new = set(old), set(new)
    return [ModelChange(added, s, activity) for s in new - old] + [
        ModelChange(added.inverse, s, activity) for s in old - new
    ]


def diff(old: SystemModel, new: SystemModel) -> list[ModelChange]:
    """Name-based changes turning ``old`` into ``new``; a rename is a removal plus an addition."""
    C = ChangeKind
    changes = []
    changes += _added_removed(old.item_names, new.item_names, C.DATA_ITEM_ADDED)
    old_nodes = {(n.name, n.kind) for n in old.nodes}
    new_nodes = {(n.name, n.kind) for n in new.nodes}
    changes += [ModelChange(C.NODE_ADDED, name) for name, _ in new_nodes - old_nodes]
    changes += [ModelChange(C.NODE_REMOVED, name) for name, _ in old_nodes - new_nodes]
    changes += _added_removed((f.key for f in old.flows), (f.key for f in new.flows), C.FLOW_ADDED)

    empty = ProcessingActivity("", frozenset(), frozenset(), frozenset())
    for name in sorted({a.name for a in old.activities} | {a.name for a in new.activities}):
        before, after = old.activity(name), new.activity(name)
        b, a = before or empty, after or empty
        changes += _added_removed(b.data_items, a.data_items, C.DATA_ITEM_ADDED, name)
        changes += _added_removed(b.purposes, a.purposes, C.PURPOSE_ADDED, name)
        if before is None or after is None or (b.processes, b.description) != (a.processes, a.description):
            changes.append(ModelChange(C.ACTIVITY_CHANGED, name, name))
    return sorted(set(changes), key=ModelChange.sort_key)


@dataclasses.dataclass(frozen=True)
class ModelNames:
    """The name skeleton of a model, which is what diff/replay preserve."""

    nodes: frozenset[str]
    items: frozenset[str]
    flows: frozenset[str]
    activities: Mapping[str, tuple[frozenset[str], frozenset[str]]]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelNames):
            return NotImplemented
        return (self.nodes, self.items, self.flows, dict(self.activities)) == (
            other.nodes, other.items, other.flows, dict(other.activities)
        )

    __hash__ = None  # type: ignore[assignment]


def model_names(model: SystemModel) -> ModelNames:
    return ModelNames(
        frozenset(n.name for n in model.nodes),
        model.item_names,
        frozenset(f.key for f in model.flows),
        MappingProxyType({a.name: (a.data_items, a.purposes) for a in model.activities}),
    )


def replay(names: ModelNames, changes: Iterable[ModelChange]) -> ModelNames:
    """Apply ``changes`` to a name skeleton.

    An ActivityChanged for an unknown activity creates it; one for a known
    activity deletes it if the other changes leave it without purposes.
    """
    C = ChangeKind
    changes = list(changes)
    nodes, items, flows = set(names.nodes), set(names.items), set(names.flows)
    acts = {k: (set(i), set(p)) for k, (i, p) in names.activities.items()}
    touched = set()
    for ch in changes:
        if ch.kind is C.ACTIVITY_CHANGED:
            touched.add(ch.subject)
            acts.setdefault(ch.subject, (set(), set()))
    for removing in (True, False):
        for ch in changes:
            if ch.kind is C.ACTIVITY_CHANGED or ch.kind.value.endswith("Removed") != removing:
                continue
            op = set.discard if removing else set.add
            if ch.kind in (C.DATA_ITEM_ADDED, C.DATA_ITEM_REMOVED):
                target = acts.setdefault(ch.activity, (set(), set()))[0] if ch.activity else items
            elif ch.kind in (C.PURPOSE_ADDED, C.PURPOSE_REMOVED):
                target = acts.setdefault(ch.activity, (set(), set()))[1]
            elif ch.kind in (C.FLOW_ADDED, C.FLOW_REMOVED):
                target = flows
            else:
                target = nodes
            op(target, ch.subject)
    for name in touched:
        if not acts[name][1]:
            del acts[name]
    return ModelNames(
        frozenset(nodes),
        frozenset(items),
        frozenset(flows),
        MappingProxyType({k: (frozenset(i), frozenset(p)) for k, (i, p) in acts.items()}),
    )
