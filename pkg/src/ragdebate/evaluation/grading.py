from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, Mapping, Optional, Sequence

from ..backends import ChatBackend, ChatRequest, Purpose, RequestTag
from ..parsing import extract_answer, parse_eval
from ..prompts import Role, TemplateName, render, system_prompt
from .datasets import FEVEROUS_ALIASES, Dataset, Sample, normalize_label

log = logging.getLogger(__name__)


class Grader(str, Enum):
    EM = "em"
    LLM_JUDGE = "llm_judge"


def grader_for(dataset: Dataset | str) -> Grader:
    return Grader.EM if Dataset(dataset).is_fact_check else Grader.LLM_JUDGE


@dataclass(frozen=True)
class EvalResult:
    sample_id: str
    predicted: str
    correct: bool
    grader: Grader
    consensus_reached: bool
    needs_review: bool = False

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["grader"] = self.grader.value
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "EvalResult":
        return cls(
            str(d["sample_id"]),
            d["predicted"],
            bool(d["correct"]),
            Grader(d["grader"]),
            bool(d["consensus_reached"]),
            bool(d.get("needs_review", False)),
        )


def exact_match(predicted: str, gold_label: str, aliases: Optional[Mapping[str, str]] = None) -> bool:
    """Label equality after trimming and case folding.

    A bracketed answer inside ``predicted`` takes precedence over the raw
    text. ``aliases`` maps surface forms (e.g. REFUTED) onto canonical labels.
    """
    answer = extract_answer(predicted)
    if answer is None:
        answer = predicted
    return normalize_label(answer, dict(aliases or {})) == normalize_label(gold_label, dict(aliases or {}))


def _exact_string_hit(predicted: str, gold_answers: Sequence[str]) -> bool:
    return any(predicted.strip() == g.strip() for g in gold_answers)


def llm_judge_eval(
    question: str,
    gold_answers: Sequence[str],
    predicted: str,
    backend: ChatBackend,
    temperature: float = 0.0,
) -> Optional[bool]:
    """Grade a free-form answer against references with an LLM.

    Returns ``None`` when the grader reply has no [True]/[False]; callers
    count that as wrong and flag it. Exact string matches skip the call.
    """
    if _exact_string_hit(predicted, gold_answers):
        return True
    prompt = render(
        TemplateName.GPT4_EVAL,
        {"question": question, "reference_answers": ", ".join(gold_answers), "evaluation_answer": predicted},
    )
    req = ChatRequest(
        system_prompt(Role.EVALUATOR), prompt, temperature, RequestTag(Role.EVALUATOR.value, "evaluator", 0, Purpose.EVAL)
    )
    verdict = parse_eval(backend.complete(req).text)
    if verdict is None:
        log.warning("grader reply for %r had no [True]/[False]; marking for review", question[:60])
    return verdict


def grade(
    sample: Sample,
    predicted: str,
    consensus_reached: bool,
    backend: Optional[ChatBackend] = None,
    temperature: float = 0.0,
) -> EvalResult:
    """Route a prediction to the grader its dataset uses."""
    grader = grader_for(sample.dataset)
    if grader is Grader.EM:
        aliases = FEVEROUS_ALIASES if sample.dataset is Dataset.FEVEROUS else None
        return EvalResult(sample.id, predicted, exact_match(predicted, sample.gold_label, aliases), grader, consensus_reached)
    if not predicted.strip():
        return EvalResult(sample.id, predicted, False, grader, consensus_reached)
    if backend is None and not _exact_string_hit(predicted, sample.gold_answers):
        raise ValueError("llm_judge grading needs a backend")
    verdict = llm_judge_eval(sample.question, sample.gold_answers, predicted, backend, temperature)
    return EvalResult(sample.id, predicted, bool(verdict), grader, consensus_reached, needs_review=verdict is None)
