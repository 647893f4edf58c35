"""The seven UK GDPR data protection principles and their decomposition templates."""

from __future__ import annotations

import dataclasses
from collections.abc import Mapping
from types import MappingProxyType

from .argument import ArgumentGraph, ArgumentError, ElementKind, subtree


class UnknownPrinciple(KeyError):
    pass


class NotAGoal(ArgumentError):
    pass


class PrincipleMismatch(ArgumentError):
    pass


# Article 5 UK GDPR, quoted exactly (paragraph 1(a) is split into its two principles).
_EXCERPTS = {
    "lawfulness_fairness_transparency": (
        'processed lawfully, fairly and in a transparent manner in relation to '
        "the data subject ('lawfulness, fairness and transparency')"
    ),
    "purpose_limitation": (
        'collected for specified, explicit and legitimate purposes and not '
        'further processed in a manner that is incompatible with those '
        'purposes; further processing for archiving purposes in the public '
        'interest, scientific or historical research purposes or statistical '
        'purposes shall, in accordance with Article 89(1), not be considered to'
        " be incompatible with the initial purposes ('purpose limitation')"
    ),
    "data_minimisation": (
        'adequate, relevant and limited to what is necessary in relation to the'
        " purposes for which they are processed ('data minimisation')"
    ),
    "accuracy": (
        'accurate and, where necessary, kept up to date; every reasonable step '
        'must be taken to ensure that personal data that are inaccurate, having'
        ' regard to the purposes for which they are processed, are erased or '
        "rectified without delay ('accuracy')"
    ),
    "storage_limitation": (
        'kept in a form which permits identification of data subjects for no '
        'longer than is necessary for the purposes for which the personal data '
        'are processed; personal data may be stored for longer periods insofar '
        'as the personal data will be processed solely for archiving purposes '
        'in the public interest, scientific or historical research purposes or '
        'statistical purposes in accordance with Article 89(1) subject to '
        'implementation of the appropriate technical and organisational '
        'measures required by this Regulation in order to safeguard the rights '
        "and freedoms of the data subject ('storage limitation')"
    ),
    "integrity_confidentiality": (
        'processed in a manner that ensures appropriate security of the '
        'personal data, including protection against unauthorised or unlawful '
        'processing and against accidental loss, destruction or damage, using '
        "appropriate technical or organisational measures ('integrity and "
        "confidentiality')"
    ),
    "accountability": (
        'The controller shall be responsible for, and be able to demonstrate '
        "compliance with, paragraph 1 ('accountability')"
    ),
}

_NOTES = {
    "lawfulness_fairness_transparency": "Article 5(1)(a), first limb.",
    "purpose_limitation": (
        "Article 5(1)(a), second limb. Archiving/research carve-outs under Article 89(1) are kept as text only."
    ),
    "data_minimisation": (
        "Article 5(1)(c). Decomposed into adequate / relevant / limited following ICO guidance on data minimisation."
    ),
    "accuracy": "Article 5(1)(d).",
    "storage_limitation": "Article 5(1)(e).",
    "integrity_confidentiality": "Article 5(1)(f).",
    "accountability": (
        "Article 5(2). Data protection by design and default (Article 25) requires controllers to "
        "'implement appropriate technical and organisational measures'; appropriateness depends on the "
        "state of the art, cost of implementation, the nature, scope, context and purposes of processing, "
        "and the risks to the rights and freedoms of individuals."
    ),
}

# ICO guidance wording for each data minimisation branch.
ICO_DATA_MINIMISATION = {
    "adequate": "sufficient to properly fulfil your stated purpose",
    "relevant": "has a rational link to that purpose",
    "limited": "you do not hold more than you need for that purpose",
}

PRINCIPLE_KEYS = tuple(_EXCERPTS)


@dataclasses.dataclass(frozen=True)
class Principle:
    key: str
    statutory_excerpt: str
    notes: str


@dataclasses.dataclass(frozen=True)
class Branch:
    key: str
    interpretation_anchor: str
    sub_dimensions: tuple[str, ...] = ()


@dataclasses.dataclass(frozen=True)
class DecompositionTemplate:
    principle: str
    branches: tuple[Branch, ...]

    def __post_init__(self) -> None:
        keys = [b.key for b in self.branches]
        if len(set(keys)) != len(keys):
            raise ValueError(f"{self.principle}: duplicate branch keys")

    @property
    def branch_keys(self) -> tuple[str, ...]:
        return tuple(b.key for b in self.branches)

    def branch(self, key: str) -> Branch:
        return next(b for b in self.branches if b.key == key)


_CATALOG = MappingProxyType(
    {key: Principle(key, _EXCERPTS[key], _NOTES[key]) for key in PRINCIPLE_KEYS}
)


def _templates() -> Mapping[str, DecompositionTemplate]:
    templates = {
        key: DecompositionTemplate(key, (Branch(key, _EXCERPTS[key]),)) for key in PRINCIPLE_KEYS
    }
    templates["data_minimisation"] = DecompositionTemplate(
        "data_minimisation",
        (
            Branch("adequate", ICO_DATA_MINIMISATION["adequate"], ("data_subjects", "data_items", "data_values")),
            Branch("relevant", ICO_DATA_MINIMISATION["relevant"]),
            Branch("limited", ICO_DATA_MINIMISATION["limited"]),
        ),
    )
    return MappingProxyType(templates)


_TEMPLATES = _templates()


def get_principle(key: str) -> Principle:
    try:
        return _CATALOG[key]
    except (KeyError, TypeError):
        raise UnknownPrinciple(key) from None


def get_template(key: str) -> DecompositionTemplate:
    try:
        return _TEMPLATES[key]
    except (KeyError, TypeError):
        raise UnknownPrinciple(key) from None


def list_principles() -> list[Principle]:
    return [_CATALOG[k] for k in PRINCIPLE_KEYS]


@dataclasses.dataclass(frozen=True)
class CoverageReport:
    principle: str
    top: str
    covered: Mapping[str, tuple[str, ...]]
    missing: tuple[str, ...]
    extraneous: tuple[str, ...]
    dimension_coverage: Mapping[str, Mapping[str, tuple[str, ...]]]

    @property
    def complete(self) -> bool:
        return not self.missing and not self.missing_dimensions

    @property
    def missing_dimensions(self) -> dict[str, tuple[str, ...]]:
        return {
            branch: tuple(d for d, goals in dims.items() if not goals)
            for branch, dims in self.dimension_coverage.items()
            if any(not goals for goals in dims.values())
        }

    def to_dict(self) -> dict:
        return {
            "principle": self.principle,
            "top": self.top,
            "covered": {k: list(v) for k, v in self.covered.items()},
            "missing": list(self.missing),
            "extraneous": list(self.extraneous),
            "dimension_coverage": {
                b: {d: list(g) for d, g in dims.items()} for b, dims in self.dimension_coverage.items()
            },
        }


def uncovered(principle: str, top: str, template: DecompositionTemplate) -> CoverageReport:
    """A report with every branch missing, for arguments that cannot be checked."""
    return CoverageReport(principle, top, {}, template.branch_keys, (), {})


def coverage(graph: ArgumentGraph, top: str, template: DecompositionTemplate) -> CoverageReport:
    """Which template branches are argued beneath ``top``.

    A goal covers a branch when it sits in ``subtree(top)`` and is annotated
    ``branch: <key>``; dimensions are matched the same way beneath each
    branch goal via ``dimension:`` annotations.
    """
    element = graph.get(top)
    if element.kind is not ElementKind.GOAL:
        raise NotAGoal(f"{top} is a {element.kind.value}, not a Goal")
    claimed = element.annotation("principle")
    if template.principle not in claimed:
        found = ", ".join(sorted(claimed)) or "none"
        raise PrincipleMismatch(
            f"{top} argues principle {found}, template is for {template.principle}"
        )

    goals = [i for i in subtree(graph, top) if graph.get(i).kind is ElementKind.GOAL]
    known = set(template.branch_keys)
    covered: dict[str, list[str]] = {}
    extraneous = set()
    for gid in goals:
        for key in graph.get(gid).annotation("branch"):
            if key in known:
                covered.setdefault(key, []).append(gid)
            else:
                extraneous.add(gid)

    dimensions: dict[str, dict[str, tuple[str, ...]]] = {}
    for branch in template.branches:
        if not branch.sub_dimensions or branch.key not in covered:
            continue
        below = set()
        for gid in covered[branch.key]:
            below.update(i for i in subtree(graph, gid) if graph.get(i).kind is ElementKind.GOAL)
        dimensions[branch.key] = {
            dim: tuple(sorted(g for g in below if dim in graph.get(g).annotation("dimension")))
            for dim in branch.sub_dimensions
        }

    return CoverageReport(
        template.principle,
        top,
        {k: tuple(sorted(covered[k])) for k in template.branch_keys if k in covered},
        tuple(k for k in template.branch_keys if k not in covered),
        tuple(sorted(extraneous)),
        dimensions,
    )
