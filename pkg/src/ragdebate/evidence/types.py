from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Tuple


class Source(str, Enum):
    WIKIPEDIA = "wikipedia"
    GOOGLE = "google"


class RetrievalMode(str, Enum):
    NONE = "none"
    WIKI = "wiki"
    GOOGLE = "google"
    ALL = "all"

    @property
    def uses_wiki(self) -> bool:
        return self in (RetrievalMode.WIKI, RetrievalMode.ALL)

    @property
    def uses_google(self) -> bool:
        return self in (RetrievalMode.GOOGLE, RetrievalMode.ALL)


@dataclass(frozen=True)
class Hit:
    """A ranked result from any retriever, before it is given a pool index."""

    doc_id: str
    text: str
    title: Optional[str] = None
    url: Optional[str] = None
    score: Optional[float] = None
    rank: int = 0


@dataclass(frozen=True)
class Evidence:
    pool_index: int
    source: Source
    text: str
    title: Optional[str] = None
    url: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pool_index": self.pool_index,
            "source": self.source.value,
            "text": self.text,
            "title": self.title,
            "url": self.url,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Evidence":
        return cls(int(d["pool_index"]), Source(d["source"]), d["text"], d.get("title"), d.get("url"))


@dataclass(frozen=True)
class EvidencePool:
    question_id: str
    items: Tuple[Evidence, ...] = ()
    failures: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "failures", tuple(self.failures))
        for i, ev in enumerate(self.items):
            if ev.pool_index != i:
                raise ValueError(f"pool indices must be contiguous from 0; item {i} has index {ev.pool_index}")

    def __len__(self) -> int:
        return len(self.items)

    def __bool__(self) -> bool:
        return True

    def subset(self, indices) -> Tuple[Evidence, ...]:
        return tuple(self.items[i] for i in indices)

    def count(self, source: Source) -> int:
        return sum(1 for ev in self.items if ev.source is source)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "question_id": self.question_id,
            "items": [ev.to_dict() for ev in self.items],
            "failures": list(self.failures),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "EvidencePool":
        return cls(
            d.get("question_id", ""),
            tuple(Evidence.from_dict(e) for e in d.get("items", ())),
            tuple(d.get("failures", ())),
        )


@dataclass(frozen=True)
class SelectionResult:
    agent_id: str
    round: int
    indices: Tuple[int, ...] = ()
    no_found: bool = False
    raw_text: Optional[str] = None
    parsed: bool = True

    def __post_init__(self):
        if self.no_found and self.indices:
            raise ValueError("no_found selection cannot carry indices")


class RetrievalError(RuntimeError):
    """A retriever or search provider failed."""

    def __init__(self, message: str, status: Optional[int] = None, provider: Optional[str] = None):
        super().__init__(message)
        self.status = status
        self.provider = provider


class SearchAuthError(RetrievalError):
    pass


class SearchQuotaError(RetrievalError):
    pass
