"""Dataset adapters: JSONL files in, :class:`Sample` objects out.

Each adapter names the JSON keys holding the id, question and answers for
one dataset. Keys are tried in order, so both the original releases and
common preprocessed dumps load without conversion.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

log = logging.getLogger(__name__)


class Task(str, Enum):
    SINGLE_HOP = "single_hop"
    MULTI_HOP = "multi_hop"
    FACT_CHECK = "fact_check"


class Dataset(str, Enum):
    TRIVIAQA = "triviaqa"
    NQ = "nq"
    HOTPOTQA = "hotpotqa"
    WIKIMULTIHOPQA = "2wikimultihopqa"
    FEVER = "fever"
    FEVEROUS = "feverous"

    @property
    def task(self) -> Task:
        return _ADAPTERS[self].task

    @property
    def is_fact_check(self) -> bool:
        return self.task is Task.FACT_CHECK


FACT_LABELS = ("SUPPORTS", "REFUTES", "NOT ENOUGH INFO")
FEVEROUS_ALIASES = {"SUPPORTED": "SUPPORTS", "REFUTED": "REFUTES", "NOT ENOUGH INFORMATION": "NOT ENOUGH INFO", "NEI": "NOT ENOUGH INFO"}

FACT_CHECK_INSTRUCTION = (
    "Is the following claim supported or refuted by the facts, or is there not enough information? "
    "Answer with SUPPORTS, REFUTES, or NOT ENOUGH INFO. Claim: "
)


def normalize_label(label: str, aliases: Optional[Dict[str, str]] = None) -> str:
    norm = " ".join(str(label).upper().split())
    if aliases:
        norm = aliases.get(norm, norm)
    return norm


@dataclass(frozen=True)
class Sample:
    id: str
    question: str
    task: Task
    dataset: Dataset
    gold_answers: Tuple[str, ...] = ()
    gold_label: Optional[str] = None

    def __post_init__(self):
        if self.task is Task.FACT_CHECK:
            if self.gold_label not in FACT_LABELS:
                raise ValueError(f"sample {self.id}: unknown label {self.gold_label!r}")
        elif not self.gold_answers:
            raise ValueError(f"sample {self.id}: QA sample needs at least one gold answer")

    @property
    def debate_question(self) -> str:
        """The text the debaters see. Claims get a fixed label instruction."""
        if self.task is Task.FACT_CHECK:
            return FACT_CHECK_INSTRUCTION + self.question
        return self.question

    @property
    def references(self) -> Tuple[str, ...]:
        return (self.gold_label,) if self.gold_label else self.gold_answers


@dataclass(frozen=True)
class Adapter:
    task: Task
    id_keys: Tuple[str, ...]
    question_keys: Tuple[str, ...]
    answer_keys: Tuple[str, ...] = ()
    label_keys: Tuple[str, ...] = ()
    label_aliases: Dict[str, str] = field(default_factory=dict)


_ADAPTERS: Dict[Dataset, Adapter] = {
    Dataset.TRIVIAQA: Adapter(Task.SINGLE_HOP, ("question_id", "id", "QuestionId"), ("question", "Question"), ("answer", "answers", "Answer")),
    Dataset.NQ: Adapter(Task.SINGLE_HOP, ("id", "example_id", "question_id"), ("question", "question_text"), ("answer", "answers", "short_answers")),
    Dataset.HOTPOTQA: Adapter(Task.MULTI_HOP, ("_id", "id"), ("question",), ("answer", "answers")),
    Dataset.WIKIMULTIHOPQA: Adapter(Task.MULTI_HOP, ("_id", "id"), ("question",), ("answer", "answers")),
    Dataset.FEVER: Adapter(Task.FACT_CHECK, ("id",), ("claim", "question"), label_keys=("label", "answer")),
    Dataset.FEVEROUS: Adapter(Task.FACT_CHECK, ("id",), ("claim", "question"), label_keys=("label", "answer"), label_aliases=FEVEROUS_ALIASES),
}


def adapter_for(dataset: Union[Dataset, str]) -> Adapter:
    return _ADAPTERS[Dataset(dataset)]


def _first(row: Dict[str, Any], keys: Sequence[str]):
    for k in keys:
        if k in row and row[k] not in (None, ""):
            return row[k]
    return None


def _answers(value: Any) -> List[str]:
    """Flatten the answer shapes seen in the wild into a list of strings.

    TriviaQA stores ``{"value": ..., "aliases": [...]}``; others use a string
    or a list.
    """
    if value is None:
        return []
    if isinstance(value, str):
        return [value]
    if isinstance(value, dict):
        out = []
        for key in ("value", "normalized_value"):
            if isinstance(value.get(key), str):
                out.append(value[key])
        for key in ("aliases", "normalized_aliases"):
            out.extend(a for a in value.get(key) or [] if isinstance(a, str))
        return out
    if isinstance(value, (list, tuple)):
        return [a for v in value for a in _answers(v)]
    return [str(value)]


def load_dataset(path: Union[str, Path], dataset: Union[Dataset, str]) -> List[Sample]:
    dataset = Dataset(dataset)
    spec = _ADAPTERS[dataset]
    path = Path(path)
    samples: List[Sample] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed JSON ({exc})") from exc
            if not isinstance(row, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            sid = _first(row, spec.id_keys)
            question = _first(row, spec.question_keys)
            if question is None:
                raise ValueError(f"{path}:{lineno}: no question field (tried {', '.join(spec.question_keys)})")
            sid = str(sid) if sid is not None else f"{dataset.value}-{lineno}"
            try:
                if spec.task is Task.FACT_CHECK:
                    raw = _first(row, spec.label_keys)
                    if raw is None:
                        raise ValueError("missing label")
                    label = normalize_label(raw, spec.label_aliases)
                    samples.append(Sample(sid, str(question).strip(), spec.task, dataset, gold_label=label))
                else:
                    answers = tuple(dict.fromkeys(a.strip() for a in _answers(_first(row, spec.answer_keys)) if a.strip()))
                    samples.append(Sample(sid, str(question).strip(), spec.task, dataset, gold_answers=answers))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    if not samples:
        log.warning("dataset file %s is empty", path)
    return samples


def sample_subset(samples: Sequence[Sample], n: int, seed: int) -> List[Sample]:
    """``n`` samples drawn uniformly without replacement, kept in file order."""
    if n > len(samples):
        raise ValueError(f"cannot sample {n} items from {len(samples)}")
    if n < 0:
        raise ValueError("n must be >= 0")
    chosen = sorted(random.Random(seed).sample(range(len(samples)), n))
    return [samples[i] for i in chosen]
