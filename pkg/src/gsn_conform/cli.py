"""``gsn-conform`` command-line interface.

Every subcommand prints a human-readable report by default, or a JSON
document with ``--format structured``. ``--out PATH`` additionally writes
the JSON document to a file. Output carries no timestamps unless
``--stamp`` is given, so identical inputs give identical bytes.
"""

from __future__ import annotations

import argparse
import datetime
import enum
import json
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from . import __version__
from .argument import (
    ArgumentGraph,
    ElementKind,
    ElementStatus,
    Finding,
    UnknownId,
    has_errors,
    sort_findings,
    well_formed,
)
from .dsl import parse
from .engine import (
    AlreadyResolved,
    ChallengeRecord,
    ChallengeResolution,
    EngineError,
    IllFormedGraph,
    ResolutionKind,
    UnknownChallenge,
    Verdict,
    annotation_findings,
    assess,
    evaluate_status,
    generate_challenges,
    graph_challenges,
    resolve_challenge,
    with_challenges,
)
from .journal import Journal, append_records, parse_journal
from .principles import (
    NotAGoal,
    PrincipleMismatch,
    UnknownPrinciple,
    coverage,
    get_template,
    list_principles,
)
from .render import render_dot
from .sysmodel import ModelChange, SystemModel, diff, parse_model
from .syntax import ParseError

SCHEMA_VERSION = 1


class ExitStatus(enum.IntEnum):
    OK = 0
    SUSPECT = 1
    ILL_FORMED = 2
    PARSE_ERROR = 3
    USAGE = 4


class UsageError(Exception):
    pass


class _InputError(Exception):
    """A parse failure in one input file, already formatted for stderr."""

    def __init__(self, path: str, error: ParseError):
        super().__init__(path)
        self.path = path
        self.error = error


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; usage errors are 4 here
        self.print_usage(sys.stderr)
        self.exit(ExitStatus.USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- loading


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _load(path: str, reader: Callable):
    try:
        return reader(_read(path))
    except ParseError as exc:
        raise _InputError(path, exc) from None


def load_argument(path: str) -> ArgumentGraph:
    return _load(path, parse)


def load_model(path: str) -> SystemModel:
    return _load(path, parse_model)


def load_journal(path: str | None, missing_ok: bool = False) -> Journal:
    if path is None or (missing_ok and not Path(path).exists()):
        return Journal()
    return _load(path, parse_journal)


def _merged_challenges(graph: ArgumentGraph, journal: Journal) -> list[ChallengeRecord]:
    """Challenges authored in the graph, then journal records with fresh ids."""
    records = graph_challenges(graph)
    seen = {r.id for r in records}
    records += [r for r in journal.challenges if r.id not in seen]
    return records


def change_dict(change: ModelChange) -> dict:
    return {"kind": change.kind.value, "subject": change.subject, "activity": change.activity}


def _status_table(statuses: dict[str, ElementStatus]) -> list[str]:
    width = max((len(i) for i in statuses), default=0)
    return [f"  {i.ljust(width)}  {s.value}" for i, s in statuses.items()]


def _findings_lines(findings: Sequence[Finding]) -> list[str]:
    if not findings:
        return ["findings: none"]
    return [f"findings ({len(findings)}):", *(f"  {f}" for f in findings)]


def _status_exit(statuses: dict[str, ElementStatus]) -> ExitStatus:
    flagged = (ElementStatus.CHALLENGED, ElementStatus.SUSPECT)
    return ExitStatus.SUSPECT if any(s in flagged for s in statuses.values()) else ExitStatus.OK


def _default_top(graph: ArgumentGraph, principle: str | None) -> str:
    tops = graph.top_goals()
    if principle is not None:
        for gid in tops:
            if principle in graph.get(gid).annotation("principle"):
                return gid
        for element in graph.ordered():
            if element.kind is ElementKind.GOAL and principle in element.annotation("principle"):
                return element.id
    if tops:
        return tops[0]
    raise UsageError("the argument has no top goal; pass --top")


# ---------------------------------------------------------------- commands
#
# Each command returns (exit status, text lines, structured payload).


def cmd_validate(args) -> tuple[ExitStatus, list[str], dict]:
    graph = load_argument(args.argument)
    findings = list(well_formed(graph))
    model_version = None
    if args.model:
        model = load_model(args.model)
        model_version = model.version
        findings = sort_findings(findings + annotation_findings(graph, model))
    status = ExitStatus.ILL_FORMED if has_errors(findings) else ExitStatus.OK
    lines = [f"{args.argument}: {len(graph)} elements, {len(graph.relationships)} relationships"]
    if model_version is not None:
        lines.append(f"model version: {model_version}")
    lines += _findings_lines(findings)
    lines.append("result: " + ("errors" if status else "well-formed"))
    payload = {
        "argument": args.argument,
        "title": graph.title,
        "model_version": model_version,
        "element_count": len(graph),
        "relationship_count": len(graph.relationships),
        "findings": [f.to_dict() for f in findings],
        "well_formed": status is ExitStatus.OK,
    }
    return status, lines, payload


def cmd_coverage(args) -> tuple[ExitStatus, list[str], dict]:
    template = _template(args.principle)
    graph = load_argument(args.argument)
    top = args.top or _default_top(graph, args.principle)
    try:
        report = coverage(graph, top, template)
    except (NotAGoal, PrincipleMismatch) as exc:
        return ExitStatus.ILL_FORMED, [f"error: {exc}"], {"principle": args.principle, "top": top, "error": str(exc)}
    except UnknownId:
        raise UsageError(f"unknown top element {top}") from None
    lines = [f"principle: {report.principle}", f"top: {report.top}"]
    for branch in template.branch_keys:
        goals = report.covered.get(branch)
        lines.append(f"  {branch}: " + (", ".join(goals) if goals else "MISSING"))
        for dim, dim_goals in report.dimension_coverage.get(branch, {}).items():
            lines.append(f"    {dim}: " + (", ".join(dim_goals) if dim_goals else "MISSING"))
    if report.extraneous:
        lines.append("extraneous: " + ", ".join(report.extraneous))
    lines.append("result: " + ("complete" if report.complete else "incomplete"))
    status = ExitStatus.OK if report.complete else ExitStatus.ILL_FORMED
    return status, lines, report.to_dict()


def cmd_render(args) -> tuple[ExitStatus, list[str], dict]:
    graph = load_argument(args.argument)
    statuses = None
    if args.journal:
        journal = load_journal(args.journal)
        challenges = _merged_challenges(graph, journal)
        statuses = evaluate_status(graph, challenges, journal.resolutions)
        graph = with_challenges(graph, challenges)
    dot = render_dot(graph, statuses)
    if args.output:
        Path(args.output).write_text(dot, encoding="utf-8")
        lines = [f"wrote {args.output} ({len(graph)} nodes)"]
    else:
        lines = dot.rstrip("\n").split("\n")
    payload = {"output": args.output, "node_count": len(graph), "dot": dot}
    return ExitStatus.OK, lines, payload


def cmd_diff(args) -> tuple[ExitStatus, list[str], dict]:
    old, new = load_model(args.old), load_model(args.new)
    changes = diff(old, new)
    lines = [f"{old.version} -> {new.version}: {len(changes)} change(s)", *(f"  {c}" for c in changes)]
    payload = {"old_version": old.version, "new_version": new.version, "changes": [change_dict(c) for c in changes]}
    return ExitStatus.OK, lines, payload


def cmd_impact(args) -> tuple[ExitStatus, list[str], dict]:
    if args.write_journal and not args.journal:
        raise UsageError("--write-journal needs --journal PATH")
    graph = load_argument(args.argument)
    old, new = load_model(args.old), load_model(args.new)
    journal = load_journal(args.journal, missing_ok=args.write_journal)
    existing = _merged_challenges(graph, journal)
    changes = diff(old, new)
    generated = generate_challenges(graph, changes, existing)
    statuses = evaluate_status(graph, [*existing, *generated], journal.resolutions)
    if args.write_journal:
        append_records(args.journal, generated)

    lines = [f"model {old.version} -> {new.version}: {len(changes)} change(s)", *(f"  {c}" for c in changes)]
    lines.append(f"generated challenges: {len(generated)}")
    lines += [f"  {c.id} -> {c.target}: {c.rationale}" for c in generated]
    lines.append("status:")
    lines += _status_table(statuses)
    if args.write_journal:
        lines.append(f"appended {len(generated)} record(s) to {args.journal}")
    payload = {
        "old_version": old.version,
        "new_version": new.version,
        "changes": [change_dict(c) for c in changes],
        "generated_challenges": [c.to_dict() for c in generated],
        "statuses": {k: v.value for k, v in statuses.items()},
    }
    return _status_exit(statuses), lines, payload


def cmd_resolve(args) -> tuple[ExitStatus, list[str], dict]:
    try:
        kind = ResolutionKind.parse(args.kind)
    except ValueError:
        raise UsageError(f"unknown resolution kind {args.kind!r}") from None
    journal = load_journal(args.journal)
    challenges = list(journal.challenges)
    if args.argument:
        graph = load_argument(args.argument)
        challenges = _merged_challenges(graph, journal)
    try:
        resolution = ChallengeResolution(args.challenge, kind, args.rationale, tuple(args.ref))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        resolve_challenge(challenges, journal.resolutions, args.challenge, resolution)
    except (UnknownChallenge, AlreadyResolved) as exc:
        payload = {"challenge": args.challenge, "error": type(exc).__name__, "message": str(exc)}
        return ExitStatus.ILL_FORMED, [f"error: {exc}"], payload
    append_records(args.journal, [resolution])
    lines = [f"resolved {args.challenge} ({kind.value}); appended to {args.journal}"]
    return ExitStatus.OK, lines, {"resolution": resolution.to_dict()}


def cmd_assess(args) -> tuple[ExitStatus, list[str], dict]:
    template = _template(args.principle)
    graph = load_argument(args.argument)
    model = load_model(args.model)
    journal = load_journal(args.journal)
    top = args.top or _default_top(graph, args.principle)
    challenges = _merged_challenges(graph, journal)
    report = assess(graph, top, model, template, challenges, journal.resolutions)

    lines = [
        f"argument: {report.title or args.argument}",
        f"model version: {report.model_version}",
        f"principle: {report.principle} (top {report.top})",
        *_findings_lines(report.findings),
        "coverage:",
    ]
    for cov in report.coverage:
        for branch in template.branch_keys:
            goals = cov.covered.get(branch)
            lines.append(f"  {branch}: " + (", ".join(goals) if goals else "MISSING"))
            for dim, dim_goals in cov.dimension_coverage.get(branch, {}).items():
                lines.append(f"    {dim}: " + (", ".join(dim_goals) if dim_goals else "MISSING"))
    if report.statuses:
        lines.append("status:")
        lines += _status_table(report.statuses)
    lines.append("open challenges: " + (", ".join(report.open_challenges) or "none"))
    lines.append("resolved challenges: " + (", ".join(report.resolved_challenges) or "none"))
    lines.append("solutions with evidence: " + (", ".join(report.evidence_summary["with_evidence"]) or "none"))
    lines.append("solutions without evidence: " + (", ".join(report.evidence_summary["without_evidence"]) or "none"))
    lines.append("undeveloped: " + (", ".join(report.undeveloped) or "none"))
    lines.append(f"verdict: {report.verdict.value}")
    status = {
        Verdict.CONFORMANT: ExitStatus.OK,
        Verdict.SUSPECT: ExitStatus.SUSPECT,
        Verdict.ILL_FORMED: ExitStatus.ILL_FORMED,
    }[report.verdict]
    return status, lines, report.to_dict()


def cmd_list_principles(args) -> tuple[ExitStatus, list[str], dict]:
    lines = []
    entries = []
    for principle in list_principles():
        template = get_template(principle.key)
        lines.append(f"{principle.key}")
        lines.append(f"  {principle.statutory_excerpt}")
        lines.append("  branches: " + ", ".join(template.branch_keys))
        entries.append(
            {
                "key": principle.key,
                "statutory_excerpt": principle.statutory_excerpt,
                "notes": principle.notes,
                "branches": [
                    {
                        "key": b.key,
                        "interpretation_anchor": b.interpretation_anchor,
                        "sub_dimensions": list(b.sub_dimensions),
                    }
                    for b in template.branches
                ],
            }
        )
    return ExitStatus.OK, lines, {"principles": entries}


def _template(key: str):
    try:
        return get_template(key)
    except UnknownPrinciple:
        known = ", ".join(p.key for p in list_principles())
        raise UsageError(f"unknown principle {key!r} (known: {known})") from None


# ---------------------------------------------------------------- wiring


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("text", "structured"), default="text", help="output format on stdout")
    common.add_argument("--out", metavar="PATH", help="also write the structured report to PATH")
    common.add_argument("--stamp", action="store_true", help="add a generation timestamp to structured reports")

    parser = _Parser(prog="gsn-conform", description="Check data-protection conformance arguments written in GSN.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("validate", parents=[common], help="check an argument for well-formedness")
    p.add_argument("argument")
    p.add_argument("--model", help="system model to cross-check annotations against")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("coverage", parents=[common], help="check branch coverage against a principle template")
    p.add_argument("argument")
    p.add_argument("principle")
    p.add_argument("--top", help="top goal id (default: the goal annotated with the principle)")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("render", parents=[common], help="write a Graphviz DOT diagram")
    p.add_argument("argument")
    p.add_argument("--journal", help="overlay statuses from this challenge journal")
    p.add_argument("-o", "--output", help="DOT file to write (default: stdout)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("diff", parents=[common], help="list changes between two system models")
    p.add_argument("old")
    p.add_argument("new")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("impact", parents=[common], help="challenge the argument with a model change")
    p.add_argument("argument")
    p.add_argument("old")
    p.add_argument("new")
    p.add_argument("--journal", help="existing challenge journal")
    p.add_argument("--write-journal", action="store_true", help="append generated challenges to --journal")
    p.set_defaults(func=cmd_impact)

    p = sub.add_parser("resolve", parents=[common], help="record a resolution in a challenge journal")
    p.add_argument("journal")
    p.add_argument("challenge")
    p.add_argument("--kind", required=True, help="rebuttal, system_change or additional_argument")
    p.add_argument("--rationale", required=True)
    p.add_argument("--ref", action="append", default=[], help="reference to supporting material (repeatable)")
    p.add_argument("--argument", help="argument whose inline challenges may also be resolved")
    p.set_defaults(func=cmd_resolve)

    p = sub.add_parser("assess", parents=[common], help="full conformance assessment")
    p.add_argument("argument")
    p.add_argument("model")
    p.add_argument("principle")
    p.add_argument("--journal", help="challenge journal")
    p.add_argument("--top", help="top goal id (default: the goal annotated with the principle)")
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("list-principles", parents=[common], help="show the principle catalog")
    p.set_defaults(func=cmd_list_principles)
    return parser


def _document(command: str, status: ExitStatus, payload: dict, stamp: bool) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "exit_status": int(status), **payload}
    if stamp:
        doc["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else ExitStatus.USAGE
    try:
        status, lines, payload = args.func(args)
    except UsageError as exc:
        print(f"gsn-conform: error: {exc}", file=sys.stderr)
        return ExitStatus.USAGE
    except _InputError as exc:
        for d in exc.error.diagnostics:
            print(f"{exc.path}:{d}", file=sys.stderr)
        status = ExitStatus.PARSE_ERROR
        lines = []
        payload = {"path": exc.path, "diagnostics": [d.to_dict() for d in exc.error.diagnostics]}
    except IllFormedGraph as exc:
        status = ExitStatus.ILL_FORMED
        lines = ["argument is ill-formed:", *(f"  {f}" for f in exc.findings)]
        payload = {"findings": [f.to_dict() for f in exc.findings]}
    except EngineError as exc:
        status = ExitStatus.ILL_FORMED
        lines = [f"error: {exc}"]
        payload = {"error": type(exc).__name__, "message": str(exc)}

    document = _document(args.command, status, payload, args.stamp)
    if args.out:
        try:
            Path(args.out).write_text(document, encoding="utf-8")
        except OSError as exc:
            print(f"gsn-conform: error: cannot write {args.out}: {exc.strerror or exc}", file=sys.stderr)
            return ExitStatus.USAGE
    if args.format == "structured":
        sys.stdout.write(document)
    elif lines:
        sys.stdout.write("\n".join(lines) + "\n")
    return int(status)


if __name__ == "__main__":
    sys.exit(main())
