"""Dialectic challenges: status evaluation, generation from model changes, resolution, assessment."""

from __future__ import annotations

import dataclasses
import enum
import re
from collections.abc import Iterable, Sequence

from .argument import (
    CHALLENGEABLE_KINDS,
    ArgumentError,
    ArgumentGraph,
    ElementKind,
    ElementStatus,
    Finding,
    GsnElement,
    RelationKind,
    Relationship,
    Severity,
    UnknownId,
    ancestors,
    has_errors,
    is_element_id,
    sort_findings,
    subtree,
    well_formed,
)
from .principles import (
    CoverageReport,
    DecompositionTemplate,
    NotAGoal,
    PrincipleMismatch,
    coverage,
    uncovered,
)
from .sysmodel import ModelChange, SystemModel, lint_model


class EngineError(ArgumentError):
    pass


class IllFormedGraph(EngineError):
    def __init__(self, findings: Sequence[Finding]):
        errors = [f for f in findings if f.severity is Severity.ERROR]
        super().__init__(f"argument graph has {len(errors)} error finding(s): " + "; ".join(map(str, errors[:3])))
        self.findings = list(findings)


class UnknownTarget(EngineError):
    pass


class InvalidChallenge(EngineError):
    pass


class UnknownChallenge(EngineError):
    pass


class AlreadyResolved(EngineError):
    pass


class ResolutionKind(str, enum.Enum):
    REBUTTAL = "Rebuttal"
    SYSTEM_CHANGE = "SystemChange"
    ADDITIONAL_ARGUMENT = "AdditionalArgument"

    @property
    def keyword(self) -> str:
        return re.sub(r"(?<!^)([A-Z])", r"_\1", self.value).lower()

    @classmethod
    def parse(cls, text: str) -> ResolutionKind:
        for kind in cls:
            if text in (kind.value, kind.keyword):
                return kind
        raise ValueError(f"unknown resolution kind {text!r}")


@dataclasses.dataclass(frozen=True)
class ChallengeRecord:
    """A dialectic challenge against one element.

    ``origin`` is None for manually raised challenges, otherwise the model
    change the challenge was generated from.
    """

    id: str
    target: str
    rationale: str
    origin: ModelChange | None = None

    def __post_init__(self) -> None:
        for value in (self.id, self.target):
            if not is_element_id(value):
                raise InvalidChallenge(f"invalid element id {value!r}")

    @property
    def origin_label(self) -> str:
        return "Manual" if self.origin is None else f"GeneratedFromChange({self.origin})"

    def to_dict(self) -> dict:
        origin = None
        if self.origin is not None:
            origin = {"kind": self.origin.kind.value, "subject": self.origin.subject, "activity": self.origin.activity}
        return {"id": self.id, "target": self.target, "rationale": self.rationale, "origin": origin}


@dataclasses.dataclass(frozen=True)
class ChallengeResolution:
    challenge: str
    kind: ResolutionKind
    rationale: str
    refs: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ResolutionKind(self.kind))
        object.__setattr__(self, "refs", tuple(self.refs))
        if not self.rationale or not self.rationale.strip():
            raise ValueError(f"resolution of {self.challenge} needs a rationale")

    def to_dict(self) -> dict:
        return {"challenge": self.challenge, "kind": self.kind.value, "rationale": self.rationale, "refs": list(self.refs)}


_PRECEDENCE = {
    ElementStatus.VALID: 0,
    ElementStatus.RESOLVED: 1,
    ElementStatus.SUSPECT: 2,
    ElementStatus.CHALLENGED: 3,
}


def graph_challenges(graph: ArgumentGraph) -> list[ChallengeRecord]:
    """Challenge elements authored directly in the graph, as manual records."""
    return [
        ChallengeRecord(rel.source, rel.target, graph.get(rel.source).statement)
        for rel in sorted(graph.edges(RelationKind.CHALLENGES))
        if rel.source in graph and rel.target in graph
    ]


def with_challenges(graph: ArgumentGraph, challenges: Iterable[ChallengeRecord]) -> ArgumentGraph:
    """``graph`` plus a Challenge element and edge for each record (for rendering)."""
    elements = dict(graph.elements)
    relationships = list(graph.relationships)
    for record in challenges:
        if record.id not in elements:
            elements[record.id] = GsnElement(record.id, ElementKind.CHALLENGE, record.rationale or record.id)
        if elements[record.id].kind is not ElementKind.CHALLENGE:
            raise InvalidChallenge(f"{record.id} names a {elements[record.id].kind.value}, not a challenge")
        rel = Relationship(RelationKind.CHALLENGES, record.id, record.target)
        if rel not in relationships:
            relationships.append(rel)
    return ArgumentGraph(elements.values(), relationships, graph.title)


def _check_challenges(
    graph: ArgumentGraph,
    challenges: Sequence[ChallengeRecord],
    resolutions: Sequence[ChallengeResolution],
) -> None:
    for record in challenges:
        if record.target not in graph:
            raise UnknownTarget(f"challenge {record.id} targets unknown element {record.target}")
        kind = graph.get(record.target).kind
        if kind not in CHALLENGEABLE_KINDS:
            raise InvalidChallenge(f"challenge {record.id} targets a {kind.value}; only goals, contexts and solutions")
    known = {c.id for c in challenges}
    for resolution in resolutions:
        if resolution.challenge not in known:
            raise UnknownChallenge(f"resolution refers to unknown challenge {resolution.challenge}")


def evaluate_status(
    graph: ArgumentGraph,
    challenges: Sequence[ChallengeRecord] = (),
    resolutions: Sequence[ChallengeResolution] = (),
) -> dict[str, ElementStatus]:
    """Status of every element under the given challenges.

    An unresolved challenge marks its target Challenged. For a goal or
    solution target everything it supports becomes Suspect; for a context
    target, the whole subtree and the ancestors of each element it is
    attached to become Suspect. A resolved challenge marks its target
    Resolved instead. The strongest mark wins.
    """
    findings = well_formed(graph)
    if has_errors(findings):
        raise IllFormedGraph(findings)
    _check_challenges(graph, challenges, resolutions)

    resolved = {r.challenge for r in resolutions}
    status = dict.fromkeys(sorted(graph.elements, key=graph.sort_key), ElementStatus.VALID)

    def mark(ids: Iterable[str], value: ElementStatus) -> None:
        for i in ids:
            if _PRECEDENCE[value] > _PRECEDENCE[status[i]]:
                status[i] = value

    for record in challenges:
        target = record.target
        if record.id in resolved:
            mark([target], ElementStatus.RESOLVED)
            continue
        mark([target], ElementStatus.CHALLENGED)
        if graph.get(target).kind is ElementKind.CONTEXT:
            for owner in graph.parents(target, RelationKind.IN_CONTEXT_OF):
                mark(subtree(graph, owner), ElementStatus.SUSPECT)
                mark(ancestors(graph, owner), ElementStatus.SUSPECT)
        else:
            mark(ancestors(graph, target), ElementStatus.SUSPECT)
    return status


_AUTO_ID = re.compile(r"CG_auto_(\d+)\Z")


def _dependents(graph: ArgumentGraph, change: ModelChange) -> list[str]:
    name = change.kind.value
    if name.startswith("DataItem"):
        hit = lambda e: change.subject in e.annotation("data_items")  # noqa: E731
    elif name.startswith("Purpose"):
        hit = lambda e: bool(e.annotation("purposes"))  # noqa: E731
    else:
        hit = lambda e: any(change.subject in tokens for tokens in e.annotations.values())  # noqa: E731
    return sorted(e.id for e in graph.elements.values() if e.kind in CHALLENGEABLE_KINDS and hit(e))


def generate_challenges(
    graph: ArgumentGraph,
    changes: Sequence[ModelChange],
    existing: Sequence[ChallengeRecord] = (),
) -> list[ChallengeRecord]:
    """One challenge per (change, dependent element) pair.

    Data item changes hit elements whose ``data_items`` annotation names the
    item; any purpose change hits every element carrying a ``purposes``
    annotation; node, flow and activity changes hit elements annotated with
    the changed name. Pairs already present in ``existing`` are skipped, and
    new ids continue the ``CG_auto_<n>`` sequence.
    """
    findings = well_formed(graph)
    if has_errors(findings):
        raise IllFormedGraph(findings)

    taken = set(graph.elements) | {c.id for c in existing}
    seen = {(c.target, c.origin) for c in existing if c.origin is not None}
    counter = max((int(m.group(1)) for i in taken if (m := _AUTO_ID.match(i))), default=0)
    out = []
    for change in changes:
        for target in _dependents(graph, change):
            if (target, change) in seen:
                continue
            seen.add((target, change))
            counter += 1
            while f"CG_auto_{counter}" in taken:
                counter += 1
            cid = f"CG_auto_{counter}"
            taken.add(cid)
            element = graph.get(target)
            rationale = f"{change.describe()}; {element.kind.value.lower()} {target} depends on it and may no longer hold"
            out.append(ChallengeRecord(cid, target, rationale, change))
    return out


def resolve_challenge(
    challenges: Sequence[ChallengeRecord],
    resolutions: Sequence[ChallengeResolution],
    challenge_id: str,
    resolution: ChallengeResolution,
) -> tuple[ChallengeResolution, ...]:
    """Append ``resolution`` to the (append-only) resolution log."""
    if challenge_id not in {c.id for c in challenges}:
        raise UnknownChallenge(f"no challenge {challenge_id}")
    if resolution.challenge != challenge_id:
        raise ValueError(f"resolution is for {resolution.challenge}, not {challenge_id}")
    if any(r.challenge == challenge_id for r in resolutions):
        raise AlreadyResolved(f"challenge {challenge_id} is already resolved")
    return (*resolutions, resolution)


class Verdict(str, enum.Enum):
    CONFORMANT = "Conformant-as-argued"
    SUSPECT = "Suspect"
    ILL_FORMED = "Ill-formed"


@dataclasses.dataclass(frozen=True)
class AssessmentReport:
    title: str
    model_version: str
    principle: str
    top: str
    findings: tuple[Finding, ...]
    coverage: tuple[CoverageReport, ...]
    statuses: dict[str, ElementStatus]
    open_challenges: tuple[str, ...]
    resolved_challenges: tuple[str, ...]
    evidence_summary: dict[str, tuple[str, ...]]
    undeveloped: tuple[str, ...]
    verdict: Verdict

    def elements_with(self, status: ElementStatus) -> list[str]:
        return [i for i, s in self.statuses.items() if s is status]

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "model_version": self.model_version,
            "principle": self.principle,
            "top": self.top,
            "findings": [f.to_dict() for f in self.findings],
            "coverage": [c.to_dict() for c in self.coverage],
            "statuses": {k: v.value for k, v in self.statuses.items()},
            "open_challenges": list(self.open_challenges),
            "resolved_challenges": list(self.resolved_challenges),
            "evidence_summary": {k: list(v) for k, v in self.evidence_summary.items()},
            "undeveloped": list(self.undeveloped),
            "verdict": self.verdict.value,
        }


def annotation_findings(graph: ArgumentGraph, model: SystemModel) -> list[Finding]:
    """Warn about data item / purpose annotations the model does not declare."""
    known = {"data_items": model.item_names, "purposes": model.purposes}
    findings = []
    for element in graph.ordered():
        for key, names in known.items():
            for token in sorted(element.annotation(key) - names):
                findings.append(
                    Finding(
                        Severity.WARNING,
                        "ANNOTATION_UNKNOWN_IN_MODEL",
                        (element.id,),
                        f"{element.id}: {key} token {token!r} is not in model version {model.version}",
                    )
                )
    return findings


def _coverage_findings(report: CoverageReport) -> list[Finding]:
    findings = [
        Finding(Severity.ERROR, "BRANCH_MISSING", (report.top,),
                f"no goal under {report.top} argues the {branch!r} branch of {report.principle}")
        for branch in report.missing
    ]
    for branch, dims in report.missing_dimensions.items():
        goals = report.covered.get(branch, ())
        findings.extend(
            Finding(Severity.WARNING, "DIMENSION_MISSING", tuple(goals),
                    f"branch {branch!r} does not argue the {dim!r} dimension")
            for dim in dims
        )
    findings.extend(
        Finding(Severity.WARNING, "UNKNOWN_BRANCH", (gid,), f"{gid} is annotated with a branch outside the template")
        for gid in report.extraneous
    )
    return findings


def assess(
    graph: ArgumentGraph,
    top: str,
    model: SystemModel,
    template: DecompositionTemplate,
    challenges: Sequence[ChallengeRecord] = (),
    resolutions: Sequence[ChallengeResolution] = (),
) -> AssessmentReport:
    """Combine well-formedness, coverage, challenge status and evidence into one report.

    Never raises on bad input: problems become Error findings and an
    Ill-formed verdict.
    """
    findings = list(well_formed(graph))
    findings += annotation_findings(graph, model)
    findings += lint_model(model)

    try:
        report = coverage(graph, top, template)
        findings += _coverage_findings(report)
    except (UnknownId, NotAGoal, PrincipleMismatch) as exc:
        code = {UnknownId: "UNKNOWN_TOP", NotAGoal: "NOT_A_GOAL", PrincipleMismatch: "PRINCIPLE_MISMATCH"}[type(exc)]
        findings.append(Finding(Severity.ERROR, code, (top,), str(exc)))
        report = uncovered(template.principle, top, template)

    statuses: dict[str, ElementStatus] = {}
    if not has_errors(findings):
        try:
            statuses = evaluate_status(graph, challenges, resolutions)
        except EngineError as exc:
            code = {
                UnknownTarget: "UNKNOWN_CHALLENGE_TARGET",
                InvalidChallenge: "INVALID_CHALLENGE_TARGET",
                UnknownChallenge: "UNKNOWN_CHALLENGE",
            }.get(type(exc), "ENGINE_ERROR")
            findings.append(Finding(Severity.ERROR, code, (), str(exc)))

    findings = sort_findings(findings)
    resolved = {r.challenge for r in resolutions}
    solutions = [e for e in graph.ordered() if e.kind is ElementKind.SOLUTION]
    if has_errors(findings):
        verdict = Verdict.ILL_FORMED
    elif any(s in (ElementStatus.CHALLENGED, ElementStatus.SUSPECT) for s in statuses.values()):
        verdict = Verdict.SUSPECT
    else:
        verdict = Verdict.CONFORMANT
    return AssessmentReport(
        title=graph.title,
        model_version=model.version,
        principle=template.principle,
        top=top,
        findings=tuple(findings),
        coverage=(report,),
        statuses=statuses,
        open_challenges=tuple(sorted({c.id for c in challenges if c.id not in resolved})),
        resolved_challenges=tuple(sorted({c.id for c in challenges if c.id in resolved})),
        evidence_summary={
            "with_evidence": tuple(s.id for s in solutions if s.evidence is not None),
            "without_evidence": tuple(s.id for s in solutions if s.evidence is None),
        },
        undeveloped=tuple(e.id for e in graph.ordered() if e.undeveloped),
        verdict=verdict,
    )
