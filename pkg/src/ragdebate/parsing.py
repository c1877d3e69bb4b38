"""Parsers for the bracketed tokens that carry answers, verdicts and selections.

Every parser here is total: malformed model output degrades to a safe default
instead of raising, and the caller decides whether to log it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional

_BRACKETED = re.compile(r"\[([^\[\]]*)\]")
_INTEGER = re.compile(r"^\s*(\d+)\s*$")
_NO_FOUND = re.compile(r"^\s*no\s+found\s*$", re.IGNORECASE)


def bracketed_tokens(text: str) -> List[str]:
    """All innermost ``[...]`` contents in order of appearance, untrimmed."""
    return _BRACKETED.findall(text or "")


def extract_answer(raw: str) -> Optional[str]:
    """Content of the last bracket pair, trimmed; ``None`` if there is none."""
    tokens = bracketed_tokens(raw)
    if not tokens:
        return None
    return tokens[-1].strip()


def parse_judge(raw: str) -> Optional[bool]:
    """``True`` for [Yes], ``False`` for [No], ``None`` when neither appears.

    The last Yes/No bracket wins, matching case-insensitively.
    """
    for token in reversed(bracketed_tokens(raw)):
        word = token.strip().lower()
        if word == "yes":
            return True
        if word == "no":
            return False
    return None


def parse_eval(raw: str) -> Optional[bool]:
    """Last bracketed True/False in a grading reply, or ``None``."""
    for token in reversed(bracketed_tokens(raw)):
        word = token.strip().lower()
        if word == "true":
            return True
        if word == "false":
            return False
    return None


@dataclass(frozen=True)
class ParsedSelection:
    indices: tuple
    no_found: bool
    parsed: bool


def parse_selection(raw: str, pool_size: int, max_selected: int) -> ParsedSelection:
    """Turn a self-selection reply into pool indices.

    ``[No Found]`` anywhere wins. Otherwise integer tokens are kept in order of
    first appearance, out-of-range ones dropped, and the list is capped at
    ``max_selected``. A reply with neither kind of token counts as no_found
    with ``parsed=False``.
    """
    tokens = bracketed_tokens(raw)
    if any(_NO_FOUND.match(t) for t in tokens):
        return ParsedSelection((), True, True)

    numbers = [int(m.group(1)) for m in map(_INTEGER.match, tokens) if m]
    if not numbers:
        return ParsedSelection((), True, False)

    seen: List[int] = []
    for n in numbers:
        if n < pool_size and n not in seen:
            seen.append(n)
    return ParsedSelection(tuple(seen[: max(max_selected, 0)]), False, True)
