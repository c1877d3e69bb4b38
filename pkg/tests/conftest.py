from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

from ragdebate.backends import Purpose, ScriptedBackend
from ragdebate.evidence import Evidence, EvidencePool, Source

FIXTURES = Path(__file__).parent / "fixtures"
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


def make_pool(n: int, question_id: str = "q") -> EvidencePool:
    return EvidencePool(question_id, tuple(Evidence(i, Source.WIKIPEDIA, f"passage {i}") for i in range(n)))


def consensus_backend(consensus_round=None, select="[0] [1]", answer="[Paris]"):
    """Debaters always answer the same; the judge says Yes from ``consensus_round`` on."""

    def judge(req):
        if consensus_round is not None and req.tag.round >= consensus_round:
            return "All agents agree. [Yes]"
        return "Still disagreeing. [No]"

    return ScriptedBackend.from_table(
        {
            (Purpose.SELECTION, None, None): select,
            (Purpose.TALK, None, None): lambda req: f"{req.tag.agent_id} r{req.tag.round}: the answer is {answer}.",
            (Purpose.JUDGE, None, None): judge,
            (Purpose.SUMMARY, None, None): f"Therefore, the final answer is {answer}.",
            (Purpose.EVAL, None, None): "[True]",
        }
    )


@pytest.fixture
def moon_search(fixtures):
    return json.loads((fixtures / "search_moon.json").read_text(encoding="utf-8"))


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
