from .lexical import BM25Index, LexicalRetriever, Passage, load_corpus, tokenize
from .pool import (
    build_pool,
    evidence_section,
    format_evidence_block,
    retrieve_google,
    retrieve_wikipedia,
    select_evidence,
)
from .remote import DenseServiceRetriever, FixtureSearch, GoogleCustomSearch, SerperSearch
from .types import (
    Evidence,
    EvidencePool,
    Hit,
    RetrievalError,
    RetrievalMode,
    SearchAuthError,
    SearchQuotaError,
    SelectionResult,
    Source,
)

__all__ = [
    "BM25Index",
    "DenseServiceRetriever",
    "Evidence",
    "EvidencePool",
    "FixtureSearch",
    "GoogleCustomSearch",
    "Hit",
    "LexicalRetriever",
    "Passage",
    "RetrievalError",
    "RetrievalMode",
    "SearchAuthError",
    "SearchQuotaError",
    "SelectionResult",
    "SerperSearch",
    "Source",
    "build_pool",
    "evidence_section",
    "format_evidence_block",
    "load_corpus",
    "retrieve_google",
    "retrieve_wikipedia",
    "select_evidence",
    "tokenize",
]
