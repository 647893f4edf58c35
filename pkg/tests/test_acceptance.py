"""Acceptance criteria 1-9.

Each test carries ``@pytest.mark.criterion(n)``; the terminal summary prints
one PASS/FAIL line per criterion. Counts and time limits are pinned below.
"""

import json
import random
import subprocess
import sys
import time

import pydot
import pytest

import oracles
from generators import mutate_model, random_dag, random_graph, random_model
from gsn_conform.argument import (
    CycleIntroduced,
    ElementKind,
    RelationKind,
    Relationship,
    add_relationship,
    ancestors,
    relationship_violation,
    subtree,
)
from gsn_conform.dsl import parse, serialize
from gsn_conform.engine import (
    AlreadyResolved,
    ChallengeRecord,
    ChallengeResolution,
    ResolutionKind,
    Verdict,
    assess,
    evaluate_status,
    generate_challenges,
    resolve_challenge,
)
from gsn_conform.journal import parse_journal
from gsn_conform.principles import PRINCIPLE_KEYS, get_principle, get_template
from gsn_conform.render import render_dot
from gsn_conform.sysmodel import diff

VALIDATE_SECONDS = 1.0
SUITE_SECONDS = 60.0
ROUND_TRIP_GRAPHS = 1000
CYCLE_INSERTIONS = 100
DUALITY_GRAPHS = 500
MONOTONICITY_CASES = 500
DIFF_PAIRS = 200
MAX_ELEMENTS = 30

SB, IC = RelationKind.SUPPORTED_BY, RelationKind.IN_CONTEXT_OF


def cli(*argv):
    """Run the installed entry point in a fresh interpreter."""
    cmd = [sys.executable, "-m", "gsn_conform", *map(str, argv)]
    return subprocess.run(cmd, capture_output=True, text=True, check=False)


def _non_valid(statuses):
    return {k: v for k, v in statuses.items() if v != "Valid"}


# ---------------------------------------------------------------- 1


@pytest.mark.criterion(1)
def test_fixture_elements_and_edges(minimisation):
    expected_ids = {f"G{i}" for i in range(1, 10)} | {"S1", "S2"} | {f"C{i}" for i in range(1, 7)} | {"Sn1", "Sn2"}
    assert set(minimisation.elements) == expected_ids
    expected = {
        "G1": {"C1", "C2", "C3", "C4", "S1"},
        "S1": {"G2", "G3", "G4"},
        "G2": {"C5", "S2"},
        "S2": {"C6", "G5", "G6", "G7"},
        "G5": {"G8", "G9"},
        "G8": {"Sn1"},
        "G9": {"Sn2"},
    }
    actual = {}
    for rel in minimisation.relationships:
        actual.setdefault(rel.source, set()).add(rel.target)
        wanted = IC if minimisation.get(rel.target).kind is ElementKind.CONTEXT else SB
        assert rel.kind is wanted
    assert actual == expected
    assert len(minimisation.relationships) == 18


@pytest.mark.criterion(1)
def test_fixture_validates_quickly(fixtures_dir):
    start = time.perf_counter()
    result = cli("validate", fixtures_dir / "minimisation.gsn", "--model", fixtures_dir / "studentcheck_v1.sys")
    elapsed = time.perf_counter() - start
    assert result.returncode == 0, result.stderr
    assert elapsed < VALIDATE_SECONDS, f"validate took {elapsed:.3f}s"


# ---------------------------------------------------------------- 2


@pytest.mark.criterion(2)
def test_round_trip_fixture(minimisation):
    text = serialize(minimisation)
    assert parse(text) == minimisation
    assert serialize(parse(text)) == text


@pytest.mark.criterion(2)
def test_round_trip_random_graphs():
    failures = []
    for seed in range(ROUND_TRIP_GRAPHS):
        graph = random_graph(random.Random(seed), MAX_ELEMENTS)
        assert len(graph) <= MAX_ELEMENTS
        again = parse(serialize(graph))
        if again != graph or set(again.relationships) != set(graph.relationships):
            failures.append(seed)
    assert failures == []


# ---------------------------------------------------------------- 3 and 4


def _impact(fixtures_dir, new):
    result = cli("impact", fixtures_dir / "minimisation.gsn", fixtures_dir / "studentcheck_v1.sys",
                 fixtures_dir / new, "--format", "structured")
    return result.returncode, json.loads(result.stdout)


@pytest.mark.criterion(3)
def test_scenario_two(fixtures_dir, minimisation):
    code, doc = _impact(fixtures_dir, "studentcheck_v2.sys")
    assert code == 1
    challenges = doc["generated_challenges"]
    assert len(challenges) == 2 and {c["target"] for c in challenges} == {"G6"}
    statuses = doc["statuses"]
    assert _non_valid(statuses) == {"G6": "Challenged", "S2": "Suspect", "G2": "Suspect", "S1": "Suspect",
                                    "G1": "Suspect"}
    assert oracles.ancestors(minimisation, "G6") == {"S2", "G2", "S1", "G1"}
    oracle = oracles.statuses(minimisation, [(c["id"], c["target"]) for c in challenges], set())
    assert statuses == oracle


@pytest.mark.criterion(4)
def test_scenario_three(fixtures_dir, minimisation):
    code, doc = _impact(fixtures_dir, "studentcheck_v3.sys")
    assert code == 1
    (challenge,) = doc["generated_challenges"]
    assert challenge["target"] == "C1"
    statuses = doc["statuses"]
    assert statuses["C1"] == "Challenged"
    members = oracles.subtree(minimisation, "G1")
    assert members == set(minimisation.elements)
    assert all(statuses[i] == "Suspect" for i in members - {"C1"})
    assert statuses == oracles.statuses(minimisation, [(challenge["id"], "C1")], set())


# ---------------------------------------------------------------- 5


@pytest.mark.criterion(5)
def test_rebuttal_flips_verdict(fixtures_dir, minimisation, models):
    journal = parse_journal((fixtures_dir / "cg1.journal").read_bytes())
    template = get_template("data_minimisation")
    before = assess(minimisation, "G1", models[1], template, journal.challenges)
    assert before.verdict is Verdict.SUSPECT
    rebuttal = ChallengeResolution("CG1", ResolutionKind.REBUTTAL, "session codes already identify the student")
    log = resolve_challenge(journal.challenges, (), "CG1", rebuttal)
    after = assess(minimisation, "G1", models[1], template, journal.challenges, log)
    assert after.verdict is Verdict.CONFORMANT
    assert after.statuses["G6"].value == "Resolved"
    with pytest.raises(AlreadyResolved):
        resolve_challenge(journal.challenges, log, "CG1", rebuttal)


@pytest.mark.criterion(5)
def test_rebuttal_via_cli(fixtures_dir, tmp_path):
    journal = tmp_path / "cg1.journal"
    journal.write_bytes((fixtures_dir / "cg1.journal").read_bytes())
    args = ("assess", fixtures_dir / "minimisation.gsn", fixtures_dir / "studentcheck_v1.sys", "data_minimisation",
            "--journal", journal)
    assert cli(*args).returncode == 1
    assert cli("resolve", journal, "CG1", "--kind", "rebuttal", "--rationale", "codes identify").returncode == 0
    assert cli(*args).returncode == 0
    assert cli("resolve", journal, "CG1", "--kind", "rebuttal", "--rationale", "again").returncode == 2


# ---------------------------------------------------------------- 6


@pytest.mark.criterion(6)
def test_coverage_report(fixtures_dir):
    result = cli("assess", fixtures_dir / "minimisation.gsn", fixtures_dir / "studentcheck_v1.sys",
                 "data_minimisation", "--format", "structured")
    assert result.returncode == 0
    (cov,) = json.loads(result.stdout)["coverage"]
    assert cov["covered"] == {"adequate": ["G2"], "relevant": ["G3"], "limited": ["G4"]}
    assert cov["dimension_coverage"]["adequate"] == {
        "data_subjects": ["G5"],
        "data_items": ["G6"],
        "data_values": ["G7"],
    }
    assert cov["missing"] == []


@pytest.mark.criterion(6)
def test_deleting_g3_leaves_relevant_missing(minimisation, models):
    pruned = minimisation.replace(
        elements=[e for e in minimisation.elements.values() if e.id != "G3"],
        relationships=[r for r in minimisation.relationships if "G3" not in (r.source, r.target)],
    )
    report = assess(pruned, "G1", models[1], get_template("data_minimisation"))
    (cov,) = report.coverage
    assert cov.missing == ("relevant",)
    assert "relevant" not in cov.covered
    assert report.verdict is Verdict.ILL_FORMED


# ---------------------------------------------------------------- 7


def _cycle_candidates(graph):
    _, reach = oracles.closure(graph)
    for s in sorted(graph.elements):
        for t in sorted(graph.elements):
            if s != t and reach[(t, s)]:
                if relationship_violation(SB, graph.get(s).kind, graph.get(t).kind) is None:
                    yield s, t


@pytest.mark.criterion(7)
def test_property_suite():
    start = time.perf_counter()
    rng = random.Random(7)

    rejected = 0
    while rejected < CYCLE_INSERTIONS:
        graph = random_dag(rng, MAX_ELEMENTS)
        candidates = list(_cycle_candidates(graph))
        if not candidates:
            continue
        s, t = rng.choice(candidates)
        assert oracles.would_cycle(graph, s, t)
        with pytest.raises(CycleIntroduced):
            add_relationship(graph, Relationship(SB, s, t))
        rejected += 1

    for _ in range(DUALITY_GRAPHS):
        graph = random_dag(rng, MAX_ELEMENTS)
        ids, reach = oracles.closure(graph)
        for x in ids:
            got = set(ancestors(graph, x))
            assert got == {y for y in ids if reach[(y, x)]}
            for y in ids:
                if y != x:
                    assert (y in got) == (x in subtree(graph, y) and reach[(y, x)])

    cases = 0
    while cases < MONOTONICITY_CASES:
        graph = random_dag(rng, MAX_ELEMENTS)
        targets = [i for i, e in graph.elements.items() if e.kind in (ElementKind.GOAL, ElementKind.SOLUTION)]
        pairs = [(x, y) for x in targets for y in ancestors(graph, x) if graph.get(y).kind is ElementKind.GOAL]
        if not pairs:
            continue
        x, y = rng.choice(pairs)
        marked_x = _non_valid(oracles.statuses(graph, [("CGx", x)], set()))
        marked_y = {k for k, v in evaluate_status(graph, [ChallengeRecord("CGy", y, "y")]).items()
                    if v.value != "Valid"}
        got_x = {k for k, v in evaluate_status(graph, [ChallengeRecord("CGx", x, "x")]).items() if v.value != "Valid"}
        assert got_x == set(marked_x)
        assert marked_y <= got_x
        cases += 1

    for _ in range(DIFF_PAIRS):
        a = random_model(rng)
        b = mutate_model(rng, a)
        assert diff(a, a) == [] and diff(b, b) == []
        assert {c.inverted() for c in diff(a, b)} == set(diff(b, a))

    elapsed = time.perf_counter() - start
    assert elapsed < SUITE_SECONDS, f"property checks took {elapsed:.1f}s"


@pytest.mark.criterion(7)
def test_generated_challenges_are_idempotent(minimisation, models):
    changes = diff(models[1], models[2])
    first = generate_challenges(minimisation, changes)
    assert generate_challenges(minimisation, changes, first) == []


# ---------------------------------------------------------------- 8


@pytest.mark.criterion(8)
def test_catalog_golden(data_dir):
    rows = (data_dir / "uk_gdpr_principles.txt").read_text(encoding="utf-8").splitlines()
    golden = dict(row.split("\t", 1) for row in rows)
    assert list(golden) == list(PRINCIPLE_KEYS)
    for key, text in golden.items():
        assert get_principle(key).statutory_excerpt.encode() == text.encode()


@pytest.mark.criterion(8)
def test_minimisation_anchors_golden(data_dir):
    rows = (data_dir / "ico_data_minimisation.txt").read_text(encoding="utf-8").splitlines()
    golden = dict(row.split("\t", 1) for row in rows)
    template = get_template("data_minimisation")
    for key in ("adequate", "relevant", "limited"):
        assert template.branch(key).interpretation_anchor.encode() == golden[key].encode()
    assert template.branch("adequate").interpretation_anchor == "sufficient to properly fulfil your stated purpose"
    assert template.branch("relevant").interpretation_anchor == "has a rational link to that purpose"
    assert template.branch("limited").interpretation_anchor.startswith("you do not hold more than you need")


# ---------------------------------------------------------------- 9

SHAPES = {
    ElementKind.GOAL: "box",
    ElementKind.STRATEGY: "parallelogram",
    ElementKind.CONTEXT: "box",
    ElementKind.SOLUTION: "circle",
    ElementKind.JUSTIFICATION: "ellipse",
    ElementKind.ASSUMPTION: "ellipse",
    ElementKind.CHALLENGE: "octagon",
}


@pytest.mark.criterion(9)
def test_dot_output(minimisation):
    text = render_dot(minimisation)
    (graph,) = pydot.graph_from_dot_data(text)
    nodes = {n.get_name().strip('"'): n for n in graph.get_nodes() if n.get_name() not in ("node", "edge")}
    assert sorted(nodes) == sorted(minimisation.elements)
    for eid, node in nodes.items():
        assert node.get_shape() == SHAPES[minimisation.get(eid).kind]
    assert render_dot(minimisation) == text


@pytest.mark.criterion(9)
def test_dot_byte_identical_across_runs(fixtures_dir, tmp_path):
    outputs = []
    for n in range(3):
        out = tmp_path / f"run{n}.dot"
        result = cli("render", fixtures_dir / "minimisation.gsn", "--journal", fixtures_dir / "cg1.journal",
                     "-o", out)
        assert result.returncode == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    assert pydot.graph_from_dot_data(outputs[0].decode())
