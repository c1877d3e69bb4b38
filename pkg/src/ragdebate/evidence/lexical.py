"""BM25 passage retrieval over a local JSONL corpus snapshot.

Corpus lines look like ``{"id": ..., "title": ..., "text": ...}``. Scores use
the Okapi BM25 form with the non-negative idf ``ln(1 + (N - df + 0.5) / (df + 0.5))``.
Each distinct query term contributes once. Ties break on document id,
numerically when both ids are integers.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from .types import Hit, RetrievalError

_TOKEN = re.compile(r"\w+", re.UNICODE)


def tokenize(text: str) -> List[str]:
    return _TOKEN.findall(text.lower())


def query_terms(query: str) -> List[str]:
    """Distinct query tokens in order of first appearance."""
    return list(dict.fromkeys(tokenize(query)))


def doc_id_key(doc_id: str) -> Tuple[int, Union[int, str]]:
    return (0, int(doc_id)) if doc_id.isdigit() else (1, doc_id)


@dataclass(frozen=True)
class Passage:
    id: str
    title: str
    text: str


def load_corpus(path: Union[str, Path]) -> List[Passage]:
    path = Path(path)
    if not path.exists():
        raise RetrievalError(f"corpus snapshot not found: {path}", provider="lexical")
    passages = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                passages.append(Passage(str(row["id"]), row.get("title") or "", row["text"]))
            except (ValueError, KeyError) as exc:
                raise RetrievalError(f"{path}:{lineno}: bad corpus line ({exc})", provider="lexical") from exc
    return passages


class BM25Index:
    def __init__(self, passages: Iterable[Passage], k1: float = 1.2, b: float = 0.75, include_title: bool = True):
        self.k1 = k1
        self.b = b
        self.passages: List[Passage] = list(passages)
        ids = [p.id for p in self.passages]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate passage ids in corpus")
        self._lengths: List[int] = []
        self._postings: Dict[str, List[Tuple[int, int]]] = defaultdict(list)
        for doc, p in enumerate(self.passages):
            tokens = tokenize(f"{p.title} {p.text}" if include_title else p.text)
            self._lengths.append(len(tokens))
            for term, tf in Counter(tokens).items():
                self._postings[term].append((doc, tf))
        n = len(self.passages)
        self.avgdl = (sum(self._lengths) / n) if n else 0.0
        self._idf = {t: math.log(1.0 + (n - len(p) + 0.5) / (len(p) + 0.5)) for t, p in self._postings.items()}

    @classmethod
    def from_jsonl(cls, path: Union[str, Path], **kwargs) -> "BM25Index":
        return cls(load_corpus(path), **kwargs)

    def __len__(self) -> int:
        return len(self.passages)

    def scores(self, query: str) -> Dict[int, float]:
        """Scores for every document sharing at least one term with the query."""
        acc: Dict[int, float] = {}
        for term in query_terms(query):
            postings = self._postings.get(term)
            if not postings:
                continue
            idf = self._idf[term]
            for doc, tf in postings:
                norm = self.k1 * (1.0 - self.b + self.b * self._lengths[doc] / self.avgdl)
                acc[doc] = acc.get(doc, 0.0) + idf * tf * (self.k1 + 1.0) / (tf + norm)
        return acc

    def search(self, query: str, k: int) -> List[Hit]:
        if k <= 0:
            return []
        scored = sorted(self.scores(query).items(), key=lambda kv: (-kv[1], doc_id_key(self.passages[kv[0]].id)))
        hits = []
        for rank, (doc, score) in enumerate(scored[:k]):
            p = self.passages[doc]
            hits.append(Hit(doc_id=p.id, text=p.text, title=p.title or None, score=score, rank=rank))
        return hits


class LexicalRetriever:
    """Wikipedia-passage retriever backed by a local :class:`BM25Index`."""

    name = "lexical"

    def __init__(self, index: BM25Index):
        self.index = index

    @classmethod
    def from_jsonl(cls, path: Union[str, Path], **kwargs) -> "LexicalRetriever":
        return cls(BM25Index.from_jsonl(path, **kwargs))

    def retrieve(self, query: str, k: int) -> Sequence[Hit]:
        return self.index.search(query, k)
