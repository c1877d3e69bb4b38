"""Prompt templates and role (system) prompts.

Templates live as UTF-8 text assets next to this module so golden tests can
diff them directly. Slots use ``{name}`` syntax; the template text itself
contains no other braces.
"""

from __future__ import annotations

import string
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Sequence, Tuple


class TemplateName(str, Enum):
    SIMULTANEOUS_TALK = "simultaneous_talk"
    ORDERLY_TALK = "orderly_talk"
    JUDGEMENT = "judgement"
    SUMMARY = "summary"
    SELF_SELECTION = "self_selection"
    GPT4_EVAL = "gpt4_eval"


class Role(str, Enum):
    DEBATER = "debater"
    JUDGE = "judge"
    SUMMARIZER = "summarizer"
    EVALUATOR = "evaluator"


class RenderError(KeyError):
    """A template slot had no binding."""

    def __str__(self) -> str:
        return self.args[0] if self.args else "render error"


def _asset(name: str) -> str:
    text = resources.files(__package__).joinpath("templates", name).read_text(encoding="utf-8")
    return text.replace("\r\n", "\n")


@lru_cache(maxsize=None)
def template_text(name: TemplateName | str) -> str:
    return _asset(f"{TemplateName(name).value}.txt")


def template_slots(name: TemplateName | str) -> Tuple[str, ...]:
    """Slot names in order of first appearance."""
    slots = []
    for _, field, _, _ in string.Formatter().parse(template_text(name)):
        if field is not None and field not in slots:
            slots.append(field)
    return tuple(slots)


def render(name: TemplateName | str, bindings: Mapping[str, str]) -> str:
    missing = [s for s in template_slots(name) if s not in bindings]
    if missing:
        raise RenderError(f"template {TemplateName(name).value!r} has unbound slot(s): {', '.join(missing)}")
    return template_text(name).format_map({k: str(v) for k, v in bindings.items()})


@lru_cache(maxsize=None)
def system_prompt(role: Role | str) -> str:
    return _asset(f"role_{Role(role).value}.txt").rstrip("\n")


@lru_cache(maxsize=None)
def simultaneous_example() -> str:
    """The fixed one-shot example used by the simultaneous-talk prompt."""
    return _asset("simultaneous_example.txt").rstrip("\n")


@lru_cache(maxsize=None)
def summary_examples() -> str:
    """The fixed three-shot block used by the summary prompt."""
    return _asset("summary_examples.txt").rstrip("\n")


def agent_label(index: int) -> str:
    return f"Agent_{index}"


def format_agent_answers(answers: Iterable[Tuple[str, str]]) -> str:
    """``(Agent_i) text`` lines, one per (agent_id, text) pair."""
    return "\n".join(f"({agent_id}) {text}" for agent_id, text in answers)


def other_agents_block(answers: Sequence[Tuple[str, str]]) -> str:
    if not answers:
        return ""
    return "Answers from other Agents:\n" + format_agent_answers(answers)


def historical_answer_block(text: str | None) -> str:
    if not text:
        return ""
    return f"Here is your historical answer: {text}"


__all__ = [
    "RenderError",
    "Role",
    "TemplateName",
    "agent_label",
    "format_agent_answers",
    "historical_answer_block",
    "other_agents_block",
    "render",
    "simultaneous_example",
    "summary_examples",
    "system_prompt",
    "template_slots",
    "template_text",
]
