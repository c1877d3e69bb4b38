from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict

from .evidence.types import RetrievalMode


@dataclass(frozen=True)
class DebateConfig:
    """Protocol hyperparameters for a single debate.

    ``max_rounds`` counts every round, with the simultaneous-talk round as
    round 1.
    """

    n_agents: int = 2
    max_rounds: int = 3
    temperature: float = 0.5
    k_google: int = 5
    k_wiki: int = 10
    max_selected: int = 3
    retrieval_mode: RetrievalMode = RetrievalMode.ALL
    self_selection_enabled: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "retrieval_mode", RetrievalMode(self.retrieval_mode))
        if self.n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.max_selected < 0:
            raise ValueError("max_selected must be >= 0")
        if self.k_google < 0 or self.k_wiki < 0:
            raise ValueError("retrieval limits must be >= 0")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be in [0, 1]")

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["retrieval_mode"] = self.retrieval_mode.value
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "DebateConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown debate settings: {', '.join(sorted(unknown))}")
        return cls(**d)
