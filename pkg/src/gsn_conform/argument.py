"""In-memory GSN argument graphs and the structural queries used by the engine.

Graphs are immutable values. ``add_element`` and ``add_relationship`` return a
new graph and enforce the element/relationship rules; the plain constructor
does not, so an ill-formed graph can still be built and handed to
``well_formed`` for reporting.
"""

from __future__ import annotations

import dataclasses
import enum
import re
from collections import deque
from collections.abc import Iterable, Mapping
from functools import cached_property
from types import MappingProxyType

_ID_RE = re.compile(r"[A-Za-z0-9_]+\Z")
_TOKEN_RE = re.compile(r"[^\s\"{},:#]+\Z")
_HEX_RE = re.compile(r"[0-9a-f]+\Z")


class ArgumentError(Exception):
    """Base class for argument graph construction errors."""


class InvalidElement(ArgumentError):
    pass


class DuplicateId(ArgumentError):
    def __init__(self, element_id: str):
        super().__init__(f"duplicate element id {element_id!r}")
        self.element_id = element_id


class UnknownId(ArgumentError):
    def __init__(self, element_id: str):
        super().__init__(f"unknown element id {element_id!r}")
        self.element_id = element_id


class KindViolation(ArgumentError):
    pass


class CycleIntroduced(ArgumentError):
    def __init__(self, cycle: list[str]):
        super().__init__("supported-by cycle: " + " -> ".join(cycle + cycle[:1]))
        self.cycle = cycle


class ElementKind(str, enum.Enum):
    GOAL = "Goal"
    STRATEGY = "Strategy"
    CONTEXT = "Context"
    SOLUTION = "Solution"
    JUSTIFICATION = "Justification"
    ASSUMPTION = "Assumption"
    CHALLENGE = "Challenge"

    @property
    def keyword(self) -> str:
        return self.value.lower()


# Canonical ordering used by the serializer.
KIND_ORDER = tuple(ElementKind)

CONTEXTUAL_KINDS = frozenset(
    {ElementKind.CONTEXT, ElementKind.JUSTIFICATION, ElementKind.ASSUMPTION}
)
CHALLENGEABLE_KINDS = frozenset(
    {ElementKind.GOAL, ElementKind.CONTEXT, ElementKind.SOLUTION}
)
_DEVELOPABLE = frozenset({ElementKind.GOAL, ElementKind.STRATEGY})

# Longest prefixes first so "Sn1" is not read as a strategy.
ID_PREFIXES = (
    ("CG", ElementKind.CHALLENGE),
    ("Sn", ElementKind.SOLUTION),
    ("G", ElementKind.GOAL),
    ("S", ElementKind.STRATEGY),
    ("C", ElementKind.CONTEXT),
    ("J", ElementKind.JUSTIFICATION),
    ("A", ElementKind.ASSUMPTION),
)

ANNOTATION_KEYS = frozenset(
    {"data_items", "purposes", "data_subjects", "principle", "branch", "dimension"}
)


class RelationKind(str, enum.Enum):
    SUPPORTED_BY = "SupportedBy"
    IN_CONTEXT_OF = "InContextOf"
    CHALLENGES = "Challenges"


class EvidenceKind(str, enum.Enum):
    JUSTIFICATION_REPORT = "justification_report"
    AUDIT_REPORT = "audit_report"
    TEST_RESULTS = "test_results"
    FORMAL_PROOF = "formal_proof"
    POLICY_DOCUMENT = "policy_document"
    OTHER = "other"


class ElementStatus(str, enum.Enum):
    VALID = "Valid"
    CHALLENGED = "Challenged"
    SUSPECT = "Suspect"
    RESOLVED = "Resolved"


class Severity(str, enum.Enum):
    ERROR = "Error"
    WARNING = "Warning"


def is_element_id(value: object) -> bool:
    return isinstance(value, str) and bool(_ID_RE.match(value))


def is_token(value: object) -> bool:
    return isinstance(value, str) and bool(_TOKEN_RE.match(value))


def expected_kind(element_id: str) -> ElementKind | None:
    """Kind implied by the conventional id prefix, if the id follows one."""
    for prefix, kind in ID_PREFIXES:
        rest = element_id[len(prefix):]
        if element_id.startswith(prefix) and (not rest or not rest[0].isalpha()):
            return kind
    return None


@dataclasses.dataclass(frozen=True)
class EvidenceRef:
    id: str
    kind: EvidenceKind
    locator: str
    digest: str | None = None
    algorithm: str | None = None

    def __post_init__(self) -> None:
        if not is_element_id(self.id):
            raise InvalidElement(f"evidence id {self.id!r} is not a valid token")
        object.__setattr__(self, "kind", EvidenceKind(self.kind))
        if not self.locator:
            raise InvalidElement(f"evidence {self.id}: empty locator")
        if self.digest is not None:
            d = self.digest
            if len(d) < 32 or len(d) % 2 or not _HEX_RE.match(d):
                raise InvalidElement(
                    f"evidence {self.id}: digest must be lowercase hex, even length, >= 32 chars"
                )
            if not self.algorithm or not is_element_id(self.algorithm):
                raise InvalidElement(f"evidence {self.id}: digest needs an algorithm name")
        elif self.algorithm is not None:
            raise InvalidElement(f"evidence {self.id}: algorithm given without digest")


@dataclasses.dataclass(frozen=True)
class GsnElement:
    id: str
    kind: ElementKind
    statement: str
    undeveloped: bool = False
    annotations: Mapping[str, frozenset[str]] = dataclasses.field(
        default_factory=dict, hash=False
    )
    evidence: EvidenceRef | None = None

    def __post_init__(self) -> None:
        if not is_element_id(self.id):
            raise InvalidElement(f"invalid element id {self.id!r}")
        if not isinstance(self.statement, str) or not self.statement.strip():
            raise InvalidElement(f"{self.id}: statement must not be empty")
        try:
            object.__setattr__(self, "kind", ElementKind(self.kind))
        except ValueError:
            raise InvalidElement(f"{self.id}: unknown kind {self.kind!r}") from None
        if self.undeveloped and self.kind not in _DEVELOPABLE:
            raise InvalidElement(f"{self.id}: only goals and strategies can be undeveloped")
        if self.evidence is not None and self.kind is not ElementKind.SOLUTION:
            raise InvalidElement(f"{self.id}: evidence is only allowed on solutions")
        annotations = {}
        for key in sorted(self.annotations):
            tokens = frozenset(self.annotations[key])
            if not is_element_id(key):
                raise InvalidElement(f"{self.id}: invalid annotation key {key!r}")
            if not tokens or not all(is_token(t) for t in tokens):
                raise InvalidElement(f"{self.id}: annotation {key!r} needs non-empty tokens")
            annotations[key] = tokens
        object.__setattr__(self, "annotations", MappingProxyType(annotations))

    def annotation(self, key: str) -> frozenset[str]:
        return self.annotations.get(key, frozenset())


@dataclasses.dataclass(frozen=True, order=True)
class Relationship:
    kind: RelationKind
    source: str
    target: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", RelationKind(self.kind))


def relationship_violation(
    kind: RelationKind, source: ElementKind, target: ElementKind
) -> str | None:
    """Why an edge of ``kind`` between these element kinds is illegal, or None."""
    K = ElementKind
    if kind is RelationKind.SUPPORTED_BY:
        if source not in (K.GOAL, K.STRATEGY):
            return f"{source.value} cannot be supported by anything"
        if target not in (K.GOAL, K.STRATEGY, K.SOLUTION):
            return f"{target.value} cannot support a claim"
        if source is K.STRATEGY and target is K.STRATEGY:
            return "Strategy cannot be supported by a Strategy"
    elif kind is RelationKind.IN_CONTEXT_OF:
        if source not in (K.GOAL, K.STRATEGY):
            return f"{source.value} cannot have context"
        if target not in CONTEXTUAL_KINDS:
            return f"{target.value} cannot be used as context"
    elif kind is RelationKind.CHALLENGES:
        if source is not K.CHALLENGE:
            return f"only challenges can challenge, not {source.value}"
        if target not in CHALLENGEABLE_KINDS:
            return f"{target.value} cannot be challenged"
    return None


class ArgumentGraph:
    """An immutable GSN argument.

    The constructor accepts any elements and relationships (duplicate ids
    excepted) so that ill-formed inputs can be represented and reported on.
    """

    def __init__(
        self,
        elements: Iterable[GsnElement] = (),
        relationships: Iterable[Relationship] = (),
        title: str = "",
    ):
        table: dict[str, GsnElement] = {}
        for element in elements:
            if element.id in table:
                raise DuplicateId(element.id)
            table[element.id] = element
        self._elements = MappingProxyType(table)
        self._relationships = tuple(relationships)
        self._title = title

    @property
    def elements(self) -> Mapping[str, GsnElement]:
        return self._elements

    @property
    def relationships(self) -> tuple[Relationship, ...]:
        return self._relationships

    @property
    def title(self) -> str:
        return self._title

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ArgumentGraph):
            return NotImplemented
        return (
            self._title == other._title
            and dict(self._elements) == dict(other._elements)
            and set(self._relationships) == set(other._relationships)
            and len(self._relationships) == len(other._relationships)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (
            f"ArgumentGraph(title={self._title!r}, elements={len(self._elements)}, "
            f"relationships={len(self._relationships)})"
        )

    def __contains__(self, element_id: object) -> bool:
        return element_id in self._elements

    def __len__(self) -> int:
        return len(self._elements)

    def replace(self, **changes) -> ArgumentGraph:
        return ArgumentGraph(
            changes.get("elements", self._elements.values()),
            changes.get("relationships", self._relationships),
            changes.get("title", self._title),
        )

    def get(self, element_id: str) -> GsnElement:
        try:
            return self._elements[element_id]
        except KeyError:
            raise UnknownId(element_id) from None

    def edges(self, kind: RelationKind) -> list[Relationship]:
        return [r for r in self._relationships if r.kind is kind]

    @cached_property
    def _adjacency(self) -> dict[RelationKind, tuple[dict, dict]]:
        adj = {}
        for kind in RelationKind:
            out: dict[str, set[str]] = {}
            inc: dict[str, set[str]] = {}
            for rel in self._relationships:
                if rel.kind is kind and rel.source in self._elements and rel.target in self._elements:
                    out.setdefault(rel.source, set()).add(rel.target)
                    inc.setdefault(rel.target, set()).add(rel.source)
            adj[kind] = (out, inc)
        return adj

    def children(self, element_id: str, kind: RelationKind = RelationKind.SUPPORTED_BY) -> list[str]:
        return sorted(self._adjacency[kind][0].get(element_id, ()))

    def parents(self, element_id: str, kind: RelationKind = RelationKind.SUPPORTED_BY) -> list[str]:
        return sorted(self._adjacency[kind][1].get(element_id, ()))

    def top_goals(self) -> list[str]:
        return [
            e.id
            for e in self.ordered()
            if e.kind is ElementKind.GOAL and not self.parents(e.id)
        ]

    @cached_property
    def depth(self) -> Mapping[str, int]:
        """Longest SupportedBy/InContextOf path from a root to each element.

        Elements stuck on a cycle are placed one level below everything else.
        """
        succ: dict[str, set[str]] = {i: set() for i in self._elements}
        indeg = dict.fromkeys(self._elements, 0)
        for kind in (RelationKind.SUPPORTED_BY, RelationKind.IN_CONTEXT_OF):
            for src, targets in self._adjacency[kind][0].items():
                for tgt in targets - succ[src]:
                    succ[src].add(tgt)
                    indeg[tgt] += 1
        depth = dict.fromkeys(self._elements, 0)
        queue = deque(sorted(i for i, d in indeg.items() if d == 0))
        seen = set()
        while queue:
            node = queue.popleft()
            seen.add(node)
            for nxt in sorted(succ[node]):
                depth[nxt] = max(depth[nxt], depth[node] + 1)
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    queue.append(nxt)
        floor = max(depth.values(), default=0) + 1
        for node in self._elements:
            if node not in seen:
                depth[node] = floor
        return MappingProxyType(depth)

    def sort_key(self, element_id: str) -> tuple[int, str]:
        return (self.depth.get(element_id, 0), element_id)

    def ordered(self) -> list[GsnElement]:
        """Elements by topological depth, then id."""
        return [self._elements[i] for i in sorted(self._elements, key=self.sort_key)]


def add_element(graph: ArgumentGraph, element: GsnElement) -> ArgumentGraph:
    if not isinstance(element, GsnElement):
        raise InvalidElement(f"not a GsnElement: {element!r}")
    if element.id in graph:
        raise DuplicateId(element.id)
    return ArgumentGraph(
        [*graph.elements.values(), element], graph.relationships, graph.title
    )


def _supported_by_path(graph: ArgumentGraph, start: str, goal: str) -> list[str] | None:
    """Shortest SupportedBy path start..goal, lexically smallest among ties."""
    prev: dict[str, str | None] = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            path = []
            cur: str | None = node
            while cur is not None:
                path.append(cur)
                cur = prev[cur]
            return path[::-1]
        for nxt in graph.children(node):
            if nxt not in prev:
                prev[nxt] = node
                queue.append(nxt)
    return None


def add_relationship(graph: ArgumentGraph, rel: Relationship) -> ArgumentGraph:
    for endpoint in (rel.source, rel.target):
        if endpoint not in graph:
            raise UnknownId(endpoint)
    if rel.source == rel.target:
        raise KindViolation(f"self-edge on {rel.source}")
    problem = relationship_violation(
        rel.kind, graph.get(rel.source).kind, graph.get(rel.target).kind
    )
    if problem:
        raise KindViolation(f"{rel.kind.value}({rel.source} -> {rel.target}): {problem}")
    if rel in graph.relationships:
        return graph
    if rel.kind is RelationKind.SUPPORTED_BY:
        path = _supported_by_path(graph, rel.target, rel.source)
        if path is not None:
            raise CycleIntroduced(path)
    return graph.replace(relationships=[*graph.relationships, rel])


def ancestors(graph: ArgumentGraph, element_id: str) -> tuple[str, ...]:
    """Everything that (transitively) is supported by ``element_id``.

    Nearest first: descending depth, ties broken by id.
    """
    graph.get(element_id)
    found: set[str] = set()
    stack = [element_id]
    while stack:
        for parent in graph.parents(stack.pop()):
            if parent not in found:
                found.add(parent)
                stack.append(parent)
    found.discard(element_id)
    return tuple(sorted(found, key=lambda i: (-graph.depth[i], i)))


def subtree(graph: ArgumentGraph, element_id: str) -> tuple[str, ...]:
    """``element_id``, its SupportedBy descendants, and their attached context."""
    graph.get(element_id)
    members = {element_id}
    stack = [element_id]
    while stack:
        for child in graph.children(stack.pop()):
            if child not in members:
                members.add(child)
                stack.append(child)
    for member in list(members):
        members.update(graph.children(member, RelationKind.IN_CONTEXT_OF))
    return tuple(sorted(members, key=graph.sort_key))


@dataclasses.dataclass(frozen=True, order=True)
class Finding:
    severity: Severity
    code: str
    ids: tuple[str, ...]
    message: str

    def to_dict(self) -> dict:
        return {
            "severity": self.severity.value,
            "code": self.code,
            "ids": list(self.ids),
            "message": self.message,
        }

    def __str__(self) -> str:
        where = ",".join(self.ids)
        return f"{self.severity.value.upper()} {self.code} [{where}] {self.message}"


def sort_findings(findings: Iterable[Finding]) -> list[Finding]:
    rank = {Severity.ERROR: 0, Severity.WARNING: 1}
    return sorted(set(findings), key=lambda f: (rank[f.severity], f.code, f.ids, f.message))


def support_cycles(graph: ArgumentGraph) -> list[list[str]]:
    # Strongly connected components of size > 1; self-loops are reported elsewhere.
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    components = []
    counter = 0
    for root in sorted(graph.elements):
        if root in index:
            continue
        work = [(root, iter(graph.children(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt == node:
                    continue
                if nxt not in index:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(graph.children(nxt))))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.append(member)
                    if member == node:
                        break
                if len(comp) > 1:
                    components.append(sorted(comp))
    return sorted(components)


def well_formed(graph: ArgumentGraph) -> list[Finding]:
    """Structural findings for ``graph``, deterministically ordered."""
    E, W = Severity.ERROR, Severity.WARNING
    K = ElementKind
    findings: list[Finding] = []
    seen_edges: set[Relationship] = set()

    for rel in sorted(graph.relationships):
        ids = (rel.source, rel.target)
        label = f"{rel.kind.value}({rel.source} -> {rel.target})"
        if rel in seen_edges:
            findings.append(Finding(E, "DUPLICATE_RELATIONSHIP", ids, f"{label} appears more than once"))
            continue
        seen_edges.add(rel)
        missing = [i for i in ids if i not in graph]
        if missing:
            findings.append(
                Finding(E, "DANGLING_REFERENCE", ids, f"{label} refers to missing {', '.join(missing)}")
            )
            continue
        if rel.source == rel.target:
            findings.append(Finding(E, "KIND_VIOLATION", ids, f"{label} is a self-edge"))
            continue
        problem = relationship_violation(
            rel.kind, graph.get(rel.source).kind, graph.get(rel.target).kind
        )
        if problem:
            findings.append(Finding(E, "KIND_VIOLATION", ids, f"{label}: {problem}"))

    for cycle in support_cycles(graph):
        findings.append(
            Finding(E, "SUPPORT_CYCLE", tuple(cycle), "supported-by cycle through " + ", ".join(cycle))
        )

    if graph.elements and not graph.top_goals():
        findings.append(Finding(E, "NO_TOP_GOAL", (), "no goal is free of incoming supported-by edges"))

    for element in graph.ordered():
        eid = element.id
        supported = bool(graph.children(eid))
        if element.kind is K.SOLUTION and element.evidence is None:
            findings.append(Finding(E, "SOLUTION_NO_EVIDENCE", (eid,), f"solution {eid} has no evidence reference"))
        if element.kind is K.GOAL and not supported and not element.undeveloped:
            findings.append(
                Finding(W, "UNDEVELOPED_UNMARKED", (eid,), f"goal {eid} is neither supported nor marked undeveloped")
            )
        if element.kind is K.STRATEGY and not supported and not element.undeveloped:
            findings.append(Finding(W, "STRATEGY_NO_SUBGOALS", (eid,), f"strategy {eid} supports nothing"))
        if element.undeveloped and supported:
            findings.append(
                Finding(W, "UNDEVELOPED_HAS_SUPPORT", (eid,), f"{eid} is marked undeveloped but has support")
            )
        implied = expected_kind(eid)
        if implied is not None and implied is not element.kind:
            findings.append(
                Finding(
                    W,
                    "ID_PREFIX_MISMATCH",
                    (eid,),
                    f"id {eid} suggests a {implied.value} but the element is a {element.kind.value}",
                )
            )
        if element.kind in CONTEXTUAL_KINDS and not graph.parents(eid, RelationKind.IN_CONTEXT_OF):
            findings.append(
                Finding(W, "UNUSED_CONTEXT", (eid,), f"{element.kind.value.lower()} {eid} is not attached to anything")
            )
        if element.kind is K.CHALLENGE and not graph.children(eid, RelationKind.CHALLENGES):
            findings.append(Finding(W, "DETACHED_CHALLENGE", (eid,), f"challenge {eid} has no target"))
        for key in element.annotations:
            if key not in ANNOTATION_KEYS:
                findings.append(Finding(W, "UNKNOWN_ANNOTATION_KEY", (eid,), f"{eid}: unrecognised annotation {key!r}"))

    return sort_findings(findings)


def has_errors(findings: Iterable[Finding]) -> bool:
    return any(f.severity is Severity.ERROR for f in findings)
