"""Shared fixtures and the per-criterion acceptance summary."""

from __future__ import annotations

from pathlib import Path

import pytest

from gsn_conform.dsl import parse
from gsn_conform.sysmodel import parse_model

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "src" / "gsn_conform" / "fixtures"
DATA = Path(__file__).resolve().parent / "data"

_criteria: dict[int, list[bool]] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call" and not (call.when == "setup" and call.excinfo):
        return
    _criteria.setdefault(marker.args[0], []).append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        results = _criteria[number]
        verdict = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict} ({sum(results)}/{len(results)} checks)")


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def minimisation():
    return parse((FIXTURES / "minimisation.gsn").read_bytes())


@pytest.fixture(scope="session")
def models():
    return {v: parse_model((FIXTURES / f"studentcheck_v{v}.sys").read_bytes()) for v in (1, 2, 3)}
