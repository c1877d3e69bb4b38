"""The debate driver: simultaneous talk, orderly talk, judge checks, summary.

A debate is strictly sequential. Separate debates share nothing except the
backend client, so callers may run many of them on a thread pool.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Dict, List, Sequence, Tuple

from .backends import (
    BackendUnavailable,
    ChatBackend,
    ChatRequest,
    ClientRequestError,
    CountingBackend,
    ProtocolError,
    Purpose,
    RequestTag,
)
from .config import DebateConfig
from .evidence import EvidencePool, evidence_section, select_evidence
from .evidence.types import Evidence
from .parsing import extract_answer, parse_judge
from .prompts import (
    Role,
    TemplateName,
    agent_label,
    format_agent_answers,
    historical_answer_block,
    other_agents_block,
    render,
    simultaneous_example,
    summary_examples,
    system_prompt,
)
from .transcript import DebateTranscript, RoundRecord, Speaker, Utterance, Verdict

log = logging.getLogger(__name__)

Clock = Callable[[], str]
Answers = Sequence[Tuple[str, str]]

# Failures that end one debate but leave the run alive. Auth errors and
# replay cache misses are systemic and propagate.
RECOVERABLE = (BackendUnavailable, ProtocolError, ClientRequestError)


class DebateProtocolError(RuntimeError):
    """An internal invariant of the debate was violated."""


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def frozen_clock(stamp: str = "1970-01-01T00:00:00+00:00") -> Clock:
    return lambda: stamp


@dataclass
class DebateState:
    """A debate in progress. Owned by exactly one thread until finished."""

    question_id: str
    question: str
    config: DebateConfig
    pool: EvidencePool
    backend: CountingBackend
    rounds: List[RoundRecord] = field(default_factory=list)
    latest: Dict[str, Utterance] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def agent_ids(self) -> List[str]:
        return [agent_label(i) for i in range(self.config.n_agents)]

    def latest_answers(self) -> List[Tuple[str, str]]:
        return [(a, self.latest[a].raw_text) for a in self.agent_ids if a in self.latest]

    def warn(self, message: str) -> None:
        log.warning("%s: %s", self.question_id or self.question[:40], message)
        self.warnings.append(message)


def _evidence_for_turn(state: DebateState, agent_id: str, round_no: int) -> Tuple[Tuple[Evidence, ...], Utterance]:
    """Evidence shown to one debater this turn, plus a stub utterance carrying the selection."""
    cfg = state.config
    stub = Utterance(agent_id, Speaker.DEBATER, round_no, "")
    if not cfg.self_selection_enabled:
        return state.pool.items, stub
    sel = select_evidence(
        state.pool, state.question, state.backend, cfg.max_selected, agent_id, round_no, cfg.temperature
    )
    if not sel.parsed:
        state.warn(f"round {round_no}: {agent_id} selection reply unparseable; treated as [No Found]")
    stub.selected_evidence_ids = list(sel.indices)
    stub.selection_text = sel.raw_text
    stub.no_found = sel.no_found
    return state.pool.subset(sel.indices), stub


def _talk(state: DebateState, utt: Utterance, prompt: str) -> Utterance:
    req = ChatRequest(
        system_prompt(Role.DEBATER),
        prompt,
        state.config.temperature,
        RequestTag(Role.DEBATER.value, utt.agent_id, utt.round, Purpose.TALK),
    )
    utt.raw_text = state.backend.complete(req).text
    utt.extracted_answer = extract_answer(utt.raw_text)
    return utt


def run_simultaneous_round(state: DebateState) -> RoundRecord:
    """Round 1: every debater answers independently."""
    if state.rounds:
        raise DebateProtocolError("simultaneous talk must be the first round")
    record = RoundRecord(1)
    spoken = []
    for agent_id in state.agent_ids:
        evidence, utt = _evidence_for_turn(state, agent_id, 1)
        prompt = render(
            TemplateName.SIMULTANEOUS_TALK,
            {"example": simultaneous_example(), "evidences": evidence_section(evidence), "question": state.question},
        )
        spoken.append(_talk(state, utt, prompt))
    record.utterances.extend(spoken)
    for utt in spoken:
        state.latest[utt.agent_id] = utt
    return record


def run_orderly_round(state: DebateState) -> RoundRecord:
    """One orderly-talk round.

    Debaters speak in agent order. Each sees every other agent's most recent
    answer (this round if they already spoke, otherwise the previous round)
    and its own previous answer.
    """
    if not state.rounds:
        raise DebateProtocolError("orderly talk needs at least one prior round")
    round_no = len(state.rounds) + 1
    record = RoundRecord(round_no)
    for agent_id in state.agent_ids:
        missing = [a for a in state.agent_ids if a not in state.latest]
        if missing:
            raise DebateProtocolError(f"no prior answer for {', '.join(missing)}")
        others = [(a, state.latest[a].raw_text) for a in state.agent_ids if a != agent_id]
        evidence, utt = _evidence_for_turn(state, agent_id, round_no)
        prompt = render(
            TemplateName.ORDERLY_TALK,
            {
                "evidences": evidence_section(evidence),
                "answer_from_other_agents": other_agents_block(others),
                "your_historical_answer": historical_answer_block(state.latest[agent_id].raw_text),
                "question": state.question,
            },
        )
        record.utterances.append(_talk(state, utt, prompt))
        state.latest[agent_id] = utt
    return record


def _judge(question: str, answers: Answers, backend: ChatBackend, temperature: float, round_no: int):
    if not answers:
        raise ValueError("judge needs at least one debater answer")
    prompt = render(
        TemplateName.JUDGEMENT,
        {"question": question, "all_answers_from_agents": format_agent_answers(answers)},
    )
    req = ChatRequest(
        system_prompt(Role.JUDGE), prompt, temperature, RequestTag(Role.JUDGE.value, "judge", round_no, Purpose.JUDGE)
    )
    raw = backend.complete(req).text
    parsed = parse_judge(raw)
    return (Verdict.CONSENSUS if parsed else Verdict.NO_CONSENSUS), raw, parsed is not None


def judge_check(
    question: str, latest_answers: Answers, backend: ChatBackend, temperature: float = 0.5, round_no: int = 1
) -> Verdict:
    """Ask the judge whether the debaters agree. Unparseable replies mean no consensus."""
    verdict, _, ok = _judge(question, latest_answers, backend, temperature, round_no)
    if not ok:
        log.warning("judge reply had no [Yes]/[No]; continuing the debate")
    return verdict


def _summarize(question: str, answers: Answers, backend: ChatBackend, temperature: float, round_no: int):
    if not answers:
        raise ValueError("cannot summarize a debate without debater answers")
    prompt = render(
        TemplateName.SUMMARY,
        {
            "examples": summary_examples(),
            "question": question,
            "all_answers_from_agents": format_agent_answers(answers),
        },
    )
    req = ChatRequest(
        system_prompt(Role.SUMMARIZER),
        prompt,
        temperature,
        RequestTag(Role.SUMMARIZER.value, "summarizer", round_no, Purpose.SUMMARY),
    )
    raw = backend.complete(req).text
    answer = extract_answer(raw)
    return (answer if answer is not None else raw), raw, answer is not None


def summarize(
    question: str, latest_answers: Answers, backend: ChatBackend, temperature: float = 0.5, round_no: int = 1
) -> str:
    """Final answer condensed by the summarizer; its raw text if nothing is bracketed."""
    return _summarize(question, latest_answers, backend, temperature, round_no)[0]


def run_debate(
    question: str,
    pool: EvidencePool,
    config: DebateConfig,
    backend: ChatBackend,
    question_id: str = "",
    clock: Clock = utc_now,
) -> DebateTranscript:
    counting = CountingBackend(backend)
    state = DebateState(question_id or pool.question_id, question, config, pool, counting)
    transcript = DebateTranscript(state.question_id, question, config, pool, started_at=clock())
    try:
        for round_no in range(1, config.max_rounds + 1):
            record = run_simultaneous_round(state) if round_no == 1 else run_orderly_round(state)
            verdict, raw, ok = _judge(question, state.latest_answers(), counting, config.temperature, round_no)
            if not ok:
                state.warn(f"round {round_no}: judge reply unparseable; treated as no consensus")
            record.utterances.append(
                Utterance("judge", Speaker.JUDGE, round_no, raw, "Yes" if verdict is Verdict.CONSENSUS else "No")
            )
            record.judge_verdict = verdict
            state.rounds.append(record)
            if verdict is Verdict.CONSENSUS:
                break

        final, raw, extracted = _summarize(
            question, state.latest_answers(), counting, config.temperature, len(state.rounds)
        )
        if not extracted:
            state.warn("summary had no bracketed answer; using raw text")
        transcript.summary = Utterance(
            "summarizer", Speaker.SUMMARIZER, len(state.rounds), raw, final if extracted else None
        )
        transcript.final_answer = final
        transcript.final_answer_extracted = extracted
    except RECOVERABLE as exc:
        log.error("debate %s aborted: %s", state.question_id, exc)
        transcript.usable = False
        transcript.error = f"{type(exc).__name__}: {exc}"

    transcript.rounds = state.rounds
    transcript.warnings = state.warnings
    transcript.stopped_early = bool(state.rounds) and transcript.consensus_reached and len(state.rounds) < config.max_rounds
    transcript.backend_call_count = counting.calls
    transcript.finished_at = clock()
    return transcript
