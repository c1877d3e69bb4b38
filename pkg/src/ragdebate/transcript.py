"""Replayable record of one debate and its JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from .config import DebateConfig
from .evidence.types import EvidencePool

SCHEMA_VERSION = 1
CHAT_FRAMING = "system=role prompt; user=rendered task prompt"


class Speaker(str, Enum):
    DEBATER = "debater"
    JUDGE = "judge"
    SUMMARIZER = "summarizer"


class Verdict(str, Enum):
    CONSENSUS = "consensus"
    NO_CONSENSUS = "no_consensus"


@dataclass
class Utterance:
    agent_id: str
    role: Speaker
    round: int
    raw_text: str
    extracted_answer: Optional[str] = None
    selected_evidence_ids: List[int] = field(default_factory=list)
    selection_text: Optional[str] = None
    no_found: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "agent_id": self.agent_id,
            "role": self.role.value,
            "round": self.round,
            "raw_text": self.raw_text,
            "extracted_answer": self.extracted_answer,
            "selected_evidence_ids": list(self.selected_evidence_ids),
            "selection_text": self.selection_text,
            "no_found": self.no_found,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Utterance":
        return cls(
            d["agent_id"],
            Speaker(d["role"]),
            int(d["round"]),
            d["raw_text"],
            d.get("extracted_answer"),
            list(d.get("selected_evidence_ids", [])),
            d.get("selection_text"),
            bool(d.get("no_found", False)),
        )


@dataclass
class RoundRecord:
    round: int
    utterances: List[Utterance] = field(default_factory=list)
    judge_verdict: Optional[Verdict] = None

    @property
    def debater_utterances(self) -> List[Utterance]:
        return [u for u in self.utterances if u.role is Speaker.DEBATER]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "round": self.round,
            "utterances": [u.to_dict() for u in self.utterances],
            "judge_verdict": self.judge_verdict.value if self.judge_verdict else None,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "RoundRecord":
        verdict = d.get("judge_verdict")
        return cls(int(d["round"]), [Utterance.from_dict(u) for u in d["utterances"]], Verdict(verdict) if verdict else None)


@dataclass
class DebateTranscript:
    question_id: str
    question: str
    config: DebateConfig
    pool: EvidencePool
    rounds: List[RoundRecord] = field(default_factory=list)
    final_answer: str = ""
    final_answer_extracted: bool = False
    summary: Optional[Utterance] = None
    stopped_early: bool = False
    backend_call_count: int = 0
    usable: bool = True
    error: Optional[str] = None
    warnings: List[str] = field(default_factory=list)
    started_at: str = ""
    finished_at: str = ""

    @property
    def consensus_reached(self) -> bool:
        return bool(self.rounds) and self.rounds[-1].judge_verdict is Verdict.CONSENSUS

    def latest_answers(self) -> List[Tuple[str, str]]:
        """Each debater's most recent raw answer, in agent order."""
        latest: Dict[str, str] = {}
        for rec in self.rounds:
            for u in rec.debater_utterances:
                latest[u.agent_id] = u.raw_text
        return list(latest.items())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "question_id": self.question_id,
            "question": self.question,
            "config": self.config.to_dict(),
            "chat_framing": CHAT_FRAMING,
            "pool": self.pool.to_dict(),
            "rounds": [r.to_dict() for r in self.rounds],
            "summary": self.summary.to_dict() if self.summary else None,
            "final_answer": self.final_answer,
            "final_answer_extracted": self.final_answer_extracted,
            "stopped_early": self.stopped_early,
            "consensus_reached": self.consensus_reached,
            "backend_call_count": self.backend_call_count,
            "usable": self.usable,
            "error": self.error,
            "warnings": list(self.warnings),
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "DebateTranscript":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported transcript schema_version {version!r}")
        return cls(
            question_id=d["question_id"],
            question=d["question"],
            config=DebateConfig.from_dict(d["config"]),
            pool=EvidencePool.from_dict(d["pool"]),
            rounds=[RoundRecord.from_dict(r) for r in d["rounds"]],
            final_answer=d["final_answer"],
            final_answer_extracted=bool(d["final_answer_extracted"]),
            summary=Utterance.from_dict(d["summary"]) if d.get("summary") else None,
            stopped_early=bool(d["stopped_early"]),
            backend_call_count=int(d["backend_call_count"]),
            usable=bool(d["usable"]),
            error=d.get("error"),
            warnings=list(d.get("warnings", [])),
            started_at=d.get("started_at", ""),
            finished_at=d.get("finished_at", ""),
        )

    @classmethod
    def from_json(cls, line: str) -> "DebateTranscript":
        return cls.from_dict(json.loads(line))


def expected_call_count(rounds: int, n_agents: int, self_selection: bool) -> int:
    per_round = (2 * n_agents + 1) if self_selection else (n_agents + 1)
    return rounds * per_round + 1
