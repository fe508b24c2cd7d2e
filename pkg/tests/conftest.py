from __future__ import annotations

import pytest

from matchflow.core import DecisionHistory, DecisionRecord, Match, ReferenceMatch
from matchflow.datastore import fixture_path, load_task_bundle

# The worked mini example: 3x4 task, five decisions, four reference pairs.
EXAMPLE_RECORDS = (
    DecisionRecord(pair=(0, 0), confidence=0.9, timestamp=5.0),
    DecisionRecord(pair=(1, 1), confidence=0.15, timestamp=15.0),
    DecisionRecord(pair=(0, 1), confidence=0.25, timestamp=21.0),
    DecisionRecord(pair=(2, 3), confidence=1.0, timestamp=24.0),
    DecisionRecord(pair=(1, 0), confidence=0.3, timestamp=35.0),
)
EXAMPLE_REF = ReferenceMatch.of([(0, 0), (0, 1), (1, 2), (2, 3)])


@pytest.fixture
def example_history() -> DecisionHistory:
    return DecisionHistory.of(EXAMPLE_RECORDS)


@pytest.fixture
def example_ref() -> ReferenceMatch:
    return EXAMPLE_REF


@pytest.fixture(scope="session")
def mini_bundle():
    return load_task_bundle(fixture_path("purchase-order-mini"))


@pytest.fixture
def sigma_hum() -> Match:
    return Match.of([(0, 0), (1, 1), (0, 1), (2, 3), (1, 0)])


# ---------------------------------------------------------------------------
# acceptance reporting: one pass/fail line per criterion at session end

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def record_acceptance(name: str, passed: bool) -> None:
    _ACCEPTANCE_RESULTS[name] = "PASS" if passed else "FAIL"


def pytest_sessionfinish(session, exitstatus):
    if _ACCEPTANCE_RESULTS:
        out = session.config.get_terminal_writer()
        out.line("")
        out.sep("-", "acceptance criteria")
        for name, status in _ACCEPTANCE_RESULTS.items():
            out.line(f"{status}  {name}")
