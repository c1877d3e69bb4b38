"""Retrieval-augmented multi-agent debate with a replayable evaluation harness."""

__version__ = "0.1.0"

from .config import DebateConfig  # noqa: E402
from .evidence import EvidencePool, RetrievalMode, build_pool  # noqa: E402
from .parsing import extract_answer  # noqa: E402
from .protocol import judge_check, run_debate, run_orderly_round, summarize  # noqa: E402
from .transcript import DebateTranscript, RoundRecord, Utterance, Verdict  # noqa: E402

__all__ = [
    "DebateConfig",
    "DebateTranscript",
    "EvidencePool",
    "RetrievalMode",
    "RoundRecord",
    "Utterance",
    "Verdict",
    "build_pool",
    "extract_answer",
    "judge_check",
    "run_debate",
    "run_orderly_round",
    "summarize",
]
