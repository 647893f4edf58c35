"""Data-protection conformance arguments as GSN graphs.

The package parses GSN arguments and data-flow system models, checks
arguments against principle decomposition templates, and re-evaluates
element status when model changes raise challenges.
"""

__version__ = "0.1.0"

from .argument import (
    ArgumentError,
    ArgumentGraph,
    CycleIntroduced,
    DuplicateId,
    ElementKind,
    ElementStatus,
    EvidenceKind,
    EvidenceRef,
    Finding,
    GsnElement,
    InvalidElement,
    KindViolation,
    RelationKind,
    Relationship,
    Severity,
    UnknownId,
    add_element,
    add_relationship,
    ancestors,
    subtree,
    well_formed,
)
from .dsl import parse, serialize
from .engine import (
    AlreadyResolved,
    AssessmentReport,
    ChallengeRecord,
    ChallengeResolution,
    IllFormedGraph,
    InvalidChallenge,
    ResolutionKind,
    UnknownChallenge,
    UnknownTarget,
    Verdict,
    assess,
    evaluate_status,
    generate_challenges,
    resolve_challenge,
)
from .journal import Journal, parse_journal
from .principles import (
    CoverageReport,
    DecompositionTemplate,
    NotAGoal,
    PrincipleMismatch,
    UnknownPrinciple,
    coverage,
    get_principle,
    get_template,
    list_principles,
)
from .render import render_dot
from .syntax import ParseDiagnostic, ParseError
from .sysmodel import ChangeKind, ModelChange, SystemModel, diff, parse_model, serialize_model

__all__ = [name for name in dir() if not name.startswith("_")]
