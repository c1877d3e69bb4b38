from __future__ import annotations

import logging
from typing import Iterable, List, Optional, Protocol, Sequence

from ..backends import ChatBackend, ChatRequest, Purpose, RequestTag
from ..parsing import parse_selection
from ..prompts import Role, TemplateName, render, system_prompt
from .types import Evidence, EvidencePool, Hit, RetrievalError, RetrievalMode, SelectionResult, Source

log = logging.getLogger(__name__)


class PassageRetriever(Protocol):
    def retrieve(self, query: str, k: int) -> Sequence[Hit]: ...


class SearchProvider(Protocol):
    def search(self, query: str, k: int) -> Sequence[Hit]: ...


def retrieve_wikipedia(question: str, k: int, retriever: Optional[PassageRetriever]) -> List[Hit]:
    if k <= 0:
        return []
    if retriever is None:
        raise RetrievalError("no Wikipedia retriever configured", provider="wikipedia")
    return list(retriever.retrieve(question, k))[:k]


def retrieve_google(question: str, k: int, provider: Optional[SearchProvider]) -> List[Hit]:
    if k <= 0:
        return []
    if provider is None:
        raise RetrievalError("no search provider configured", provider="google")
    return list(provider.search(question, k))[:k]


def build_pool(
    question: str,
    mode: RetrievalMode | str,
    wiki_retriever: Optional[PassageRetriever] = None,
    search_provider: Optional[SearchProvider] = None,
    k_google: int = 5,
    k_wiki: int = 10,
    question_id: str = "",
) -> EvidencePool:
    """Search results first (provider rank order), then Wikipedia passages.

    A failing source is recorded in ``pool.failures`` and skipped; the pool
    is built from whatever the other source returned.
    """
    mode = RetrievalMode(mode)
    hits: List[tuple] = []
    failures: List[str] = []
    if mode.uses_google:
        try:
            hits += [(Source.GOOGLE, h) for h in retrieve_google(question, k_google, search_provider)]
        except RetrievalError as exc:
            failures.append(f"google: {exc}")
            log.warning("google retrieval failed for %r: %s", question_id or question, exc)
    if mode.uses_wiki:
        try:
            hits += [(Source.WIKIPEDIA, h) for h in retrieve_wikipedia(question, k_wiki, wiki_retriever)]
        except RetrievalError as exc:
            failures.append(f"wikipedia: {exc}")
            log.warning("wikipedia retrieval failed for %r: %s", question_id or question, exc)
    if failures and not hits and mode is not RetrievalMode.NONE:
        log.warning("no evidence retrieved for %r; debating without evidence", question_id or question)
    items = tuple(
        Evidence(i, source, h.text, h.title, h.url if source is Source.GOOGLE else None)
        for i, (source, h) in enumerate(hits)
    )
    return EvidencePool(question_id, items, tuple(failures))


def format_evidence_block(items: Iterable[Evidence]) -> str:
    return "\n".join(f"({ev.pool_index}) {ev.text}" for ev in items)


def evidence_section(items: Sequence[Evidence]) -> str:
    """The ``{evidences}`` binding: an ``Evidence:`` header over the block, or nothing."""
    if not items:
        return ""
    return "Evidence:\n" + format_evidence_block(items)


def select_evidence(
    pool: EvidencePool,
    question: str,
    backend: ChatBackend,
    max_selected: int = 3,
    agent_id: str = "Agent_0",
    round: int = 1,
    temperature: float = 0.5,
) -> SelectionResult:
    if len(pool) == 0:
        return SelectionResult(agent_id, round, (), True, None, True)
    prompt = render(TemplateName.SELF_SELECTION, {"evidences": evidence_section(pool.items), "question": question})
    req = ChatRequest(
        system_prompt(Role.DEBATER),
        prompt,
        temperature,
        RequestTag(Role.DEBATER.value, agent_id, round, Purpose.SELECTION),
    )
    text = backend.complete(req).text
    parsed = parse_selection(text, len(pool), max_selected)
    if not parsed.parsed:
        log.warning("unparseable selection from %s in round %d; selecting nothing", agent_id, round)
    return SelectionResult(agent_id, round, parsed.indices, parsed.no_found, text, parsed.parsed)
