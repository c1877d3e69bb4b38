"""A rule-based stand-in for the LLM, for offline end-to-end runs.

:class:`EvidenceOracle` knows the gold answer for each question and behaves
like an idealized debater:

* selection: picks the pool entries that contain the gold answer (up to
  three), or replies ``[No Found]``;
* talk: reads at most ``attention_span`` evidence lines, in the order shown,
  and answers correctly only if one of them contains the gold answer;
  otherwise it adopts another agent's bracketed answer if one is visible,
  or answers ``[unknown]``;
* judge: ``[Yes]`` iff every agent's bracketed answer matches;
* summary: majority vote over the agents' bracketed answers;
* eval: case-insensitive comparison against the reference answers.

It reads everything from the rendered prompt, so it exercises the same
templates a real model would see.
"""

from __future__ import annotations

import re
from collections import Counter
from typing import Dict, List, Mapping, Optional, Tuple

from ..parsing import extract_answer
from .base import ChatRequest, Purpose

_EVIDENCE_LINE = re.compile(r"^\((\d+)\) (.*)$")
_AGENT_LINE = re.compile(r"^\((Agent_\d+)\) ?(.*)$")


def _norm(text: str) -> str:
    return " ".join(text.lower().split())


def last_field(prompt: str, label: str) -> Optional[str]:
    value = None
    for line in prompt.split("\n"):
        if line.startswith(label):
            value = line[len(label):].strip()
    return value


def evidence_lines(prompt: str) -> List[Tuple[int, str]]:
    lines = prompt.split("\n")
    out: List[Tuple[int, str]] = []
    inside = False
    for line in lines:
        if line == "Evidence:":
            inside, out = True, []
            continue
        if inside:
            m = _EVIDENCE_LINE.match(line)
            if not m:
                break
            out.append((int(m.group(1)), m.group(2)))
    return out


def agent_answers(prompt: str, after: Optional[str] = None) -> Dict[str, Optional[str]]:
    if after is not None and after in prompt:
        prompt = prompt.rsplit(after, 1)[1]
    found: Dict[str, Optional[str]] = {}
    for line in prompt.split("\n"):
        m = _AGENT_LINE.match(line)
        if m:
            found[m.group(1)] = extract_answer(m.group(2))
    return found


class EvidenceOracle:
    def __init__(self, answers: Mapping[str, str], attention_span: int = 3, max_selected: int = 3):
        self.answers = {q: a for q, a in answers.items()}
        self.attention_span = attention_span
        self.max_selected = max_selected

    def gold(self, prompt: str) -> Optional[str]:
        question = last_field(prompt, "Question: ")
        return self.answers.get(question) if question is not None else None

    def __call__(self, req: ChatRequest) -> str:
        purpose = req.tag.purpose
        prompt = req.user_prompt
        if purpose is Purpose.SELECTION:
            return self._select(prompt)
        if purpose is Purpose.TALK:
            return self._talk(prompt)
        if purpose is Purpose.JUDGE:
            votes = list(agent_answers(prompt, "Agent Responses:").values())
            agree = bool(votes) and None not in votes and len({_norm(v) for v in votes}) == 1
            return "Comparing the bracketed answers. [Yes]" if agree else "The answers differ. [No]"
        if purpose is Purpose.SUMMARY:
            votes = [v for v in agent_answers(prompt, "Agent Responses:").values() if v]
            if not votes:
                return "No agent gave a bracketed answer. Therefore, the final answer is [unknown]."
            top = Counter(votes).most_common(1)[0][0]
            return f"Based on the agents' answers, the final answer is [{top}]."
        if purpose is Purpose.EVAL:
            refs = [r.strip() for r in (last_field(prompt, "Reference answers: ") or "").split(",")]
            cand = _norm(last_field(prompt, "Evaluation answer: ") or "")
            ok = any(cand and _norm(r) == cand for r in refs)
            return "Therefore, the answer is [True]." if ok else "Therefore, the answer is [False]."
        raise ValueError(f"unsupported purpose {purpose}")

    def _select(self, prompt: str) -> str:
        gold = self.gold(prompt)
        if gold is None:
            return "Nothing here answers the question. [No Found]"
        hits = [i for i, text in evidence_lines(prompt) if _norm(gold) in _norm(text)][: self.max_selected]
        if not hits:
            return "The evidence pool does not contain the answer. [No Found]"
        return "Helpful evidence: " + " ".join(f"[{i}]" for i in hits)

    def _talk(self, prompt: str) -> str:
        gold = self.gold(prompt)
        shown = evidence_lines(prompt)[: self.attention_span]
        if gold is not None and any(_norm(gold) in _norm(text) for _, text in shown):
            return f"The evidence states it directly. Therefore, the answer is [{gold}]."
        others = [a for a in agent_answers(prompt.split("Here is your historical answer:")[0]).values() if a]
        if others and others[0] != "unknown":
            return f"Following the other agents. Therefore, the answer is [{others[0]}]."
        return "I cannot find support for an answer. Therefore, the answer is [unknown]."
