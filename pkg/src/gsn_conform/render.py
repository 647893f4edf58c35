"""Graphviz DOT output for argument graphs, with optional status colouring."""

from __future__ import annotations

import textwrap
from collections.abc import Mapping

from .argument import ArgumentGraph, ElementKind, ElementStatus, RelationKind

_SHAPES = {
    ElementKind.GOAL: ("box", ""),
    ElementKind.STRATEGY: ("parallelogram", ""),
    ElementKind.CONTEXT: ("box", "rounded"),
    ElementKind.SOLUTION: ("circle", ""),
    ElementKind.JUSTIFICATION: ("ellipse", ""),
    ElementKind.ASSUMPTION: ("ellipse", ""),
    ElementKind.CHALLENGE: ("octagon", ""),
}
_SUFFIX = {ElementKind.JUSTIFICATION: "J", ElementKind.ASSUMPTION: "A"}
STATUS_COLOURS = {
    ElementStatus.VALID: "white",
    ElementStatus.CHALLENGED: "red",
    ElementStatus.SUSPECT: "orange",
    ElementStatus.RESOLVED: "green",
}
_EDGE_STYLE = {
    RelationKind.SUPPORTED_BY: "style=solid, arrowhead=normal",
    RelationKind.IN_CONTEXT_OF: "style=solid, arrowhead=empty",
    RelationKind.CHALLENGES: "style=bold, color=red, arrowhead=normal",
}
_EDGE_RANK = {kind: i for i, kind in enumerate(RelationKind)}


def dot_id(text: str) -> str:
    escaped = text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\r", "")
    return f'"{escaped}"'


def _label(element_id: str, statement: str, width: int = 36) -> str:
    lines = textwrap.wrap(statement, width) or [""]
    return "\n".join([element_id, *lines])


def render_dot(
    graph: ArgumentGraph,
    statuses: Mapping[str, ElementStatus] | None = None,
) -> str:
    """Render ``graph`` as a DOT digraph.

    Nodes come out in depth-then-id order and edges follow their source node,
    so equal inputs give byte-identical text. Relationships pointing at
    missing elements are skipped.
    """
    out = ["digraph argument {"]
    if graph.title:
        out.append(f"  label={dot_id(graph.title)};")
        out.append("  labelloc=t;")
    out.append("  rankdir=TB;")
    out.append('  node [fontname="Helvetica", fontsize=10];')
    out.append('  edge [fontname="Helvetica"];')

    order = {}
    for n, element in enumerate(graph.ordered()):
        order[element.id] = n
        shape, style = _SHAPES[element.kind]
        attrs = [f"shape={shape}", f"label={dot_id(_label(element.id, element.statement))}"]
        if element.kind in _SUFFIX:
            attrs.append(f'xlabel="{_SUFFIX[element.kind]}"')
        styles = [style] if style else []
        if element.undeveloped:
            attrs.append('peripheries=2')
        if statuses is not None and element.id in statuses:
            styles.append("filled")
            attrs.append(f"fillcolor={STATUS_COLOURS[ElementStatus(statuses[element.id])]}")
        if styles:
            attrs.append(f'style="{",".join(styles)}"')
        out.append(f"  {dot_id(element.id)} [{', '.join(attrs)}];")

    edges = sorted(
        (r for r in set(graph.relationships) if r.source in order and r.target in order),
        key=lambda r: (order[r.source], _EDGE_RANK[r.kind], order[r.target]),
    )
    for rel in edges:
        out.append(f"  {dot_id(rel.source)} -> {dot_id(rel.target)} [{_EDGE_STYLE[rel.kind]}];")
    out.append("}")
    return "\n".join(out) + "\n"
