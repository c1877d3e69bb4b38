import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bm25_oracle import brute_force_top_k, load
from conftest import make_pool
from ragdebate.backends import Purpose, ScriptedBackend
from ragdebate.evidence import (
    BM25Index,
    DenseServiceRetriever,
    EvidencePool,
    FixtureSearch,
    GoogleCustomSearch,
    LexicalRetriever,
    Passage,
    RetrievalError,
    RetrievalMode,
    SearchAuthError,
    SearchQuotaError,
    SerperSearch,
    Source,
    build_pool,
    retrieve_google,
    retrieve_wikipedia,
    select_evidence,
)
from ragdebate.evidence.types import Hit

MOON_Q = "On what date in 1969 did Neil Armstrong first set foot on the Moon?"


# ------------------------------------------------------------------ lexical retriever

@pytest.fixture(scope="module")
def corpus100(request):
    path = request.config.rootpath / "tests" / "fixtures" / "corpus100.jsonl"
    return path, load(path)


def test_ten_doc_corpus_answer_passage_first():
    docs = [Passage(str(i), f"Doc {i}", f"filler text about topic number {i} and other things") for i in range(10)]
    docs[6] = Passage("6", "Bridget Driscoll", "Bridget Driscoll was the first person killed in a car accident in London")
    index = BM25Index(docs)
    query = "who was the first person killed in a car accident?"
    hits = index.search(query, 10)
    assert hits[0].doc_id == "6"
    as_rows = [{"id": p.id, "title": p.title, "text": p.text} for p in docs]
    assert [h.doc_id for h in hits] == brute_force_top_k(as_rows, query, 10)


def test_k_zero_is_empty(corpus100):
    assert LexicalRetriever.from_jsonl(corpus100[0]).retrieve("river castle", 0) == []


def test_tie_breaks_on_lower_doc_id():
    docs = [Passage("10", "", "alpha beta"), Passage("2", "", "alpha beta"), Passage("x", "", "gamma")]
    hits = BM25Index(docs).search("alpha", 5)
    assert [h.doc_id for h in hits] == ["2", "10"]
    assert hits[0].score == hits[1].score


def test_duplicate_passages_tie_in_fixture(corpus100):
    _, rows = corpus100
    index = BM25Index(Passage(r["id"], r["title"], r["text"]) for r in rows)
    hits = index.search(rows[13]["title"], 3)
    assert [h.doc_id for h in hits] == ["13", "57", "91"]


@pytest.mark.parametrize("k", [1, 5, 10])
def test_matches_brute_force_on_fixture_queries(corpus100, k, request):
    path, rows = corpus100
    queries = json.loads((request.config.rootpath / "tests" / "fixtures" / "queries20.json").read_text())
    retriever = LexicalRetriever.from_jsonl(path)
    for q in queries:
        assert [h.doc_id for h in retriever.retrieve(q, k)] == brute_force_top_k(rows, q, k), q


words = st.sampled_from(["ab", "cd", "ef", "gh", "ij", "kl", "mn"])


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.lists(words, min_size=1, max_size=8), min_size=1, max_size=12),
    st.lists(words, min_size=1, max_size=3),
    st.integers(1, 12),
)
def test_property_matches_brute_force(doc_words, query_words, k):
    rows = [{"id": str(i), "title": "", "text": " ".join(w)} for i, w in enumerate(doc_words)]
    index = BM25Index(Passage(r["id"], r["title"], r["text"]) for r in rows)
    q = " ".join(query_words)
    assert [h.doc_id for h in index.search(q, k)] == brute_force_top_k(rows, q, k)


def test_missing_corpus_is_retrieval_error(tmp_path):
    with pytest.raises(RetrievalError):
        LexicalRetriever.from_jsonl(tmp_path / "nope.jsonl")


def test_bad_corpus_line(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": 1, "text": "ok"}\n{"title": "no text"}\n')
    with pytest.raises(RetrievalError, match=":2:"):
        LexicalRetriever.from_jsonl(p)


# ------------------------------------------------------------------ search providers

def test_fixture_search_moon(fixtures):
    hits = retrieve_google(MOON_Q, 5, FixtureSearch(fixtures / "search_moon.json"))
    assert len(hits) == 5
    assert hits[0].text.startswith("On July 20, 1969")
    assert hits[0].url == "https://example.org/moon-landing"
    assert [h.rank for h in hits] == [0, 1, 2, 3, 4]


def test_fixture_search_truncates(fixtures):
    search = FixtureSearch(fixtures / "search_moon.json")
    assert len(search.search(MOON_Q, 10)) == 10
    assert len(retrieve_google(MOON_Q, 5, search)) == 5


def test_fixture_quota_and_auth_errors(fixtures):
    search = FixtureSearch(fixtures / "search_moon.json")
    with pytest.raises(SearchQuotaError) as err:
        search.search("rate limited query", 5)
    assert err.value.status == 429
    with pytest.raises(SearchAuthError):
        search.search("bad key query", 5)


def test_google_cse_request_and_normalization():
    seen = {}

    def handler(request):
        seen["params"] = dict(request.url.params)
        return httpx.Response(200, json={"items": [
            {"title": "T1", "snippet": "S1  with\nbreaks", "link": "https://a", "pagemap": {"big": "body"}},
            {"title": "T2", "snippet": "S2", "link": "https://b"},
        ]})

    cse = GoogleCustomSearch(api_key="K", cx="C", transport=httpx.MockTransport(handler))
    hits = cse.search("moon", 5)
    assert seen["params"] == {"key": "K", "cx": "C", "q": "moon", "num": "5"}
    assert [(h.title, h.text, h.url) for h in hits] == [("T1", "S1 with breaks", "https://a"), ("T2", "S2", "https://b")]


@pytest.mark.parametrize("status,exc", [(429, SearchQuotaError), (403, SearchAuthError), (500, RetrievalError)])
def test_google_cse_errors_are_typed(status, exc):
    cse = GoogleCustomSearch(api_key="K", cx="C", transport=httpx.MockTransport(lambda r: httpx.Response(status)))
    with pytest.raises(exc) as err:
        cse.search("moon", 5)
    assert err.value.status == status


def test_serper_request():
    seen = {}

    def handler(request):
        seen["key"] = request.headers["x-api-key"]
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json={"organic": [{"title": "T", "snippet": "S", "link": "u"}]})

    hits = SerperSearch(api_key="K", transport=httpx.MockTransport(handler)).search("q", 3)
    assert seen == {"key": "K", "body": {"q": "q", "num": 3}}
    assert hits[0].text == "S"


def test_provider_without_credentials(monkeypatch):
    monkeypatch.delenv("GOOGLE_API_KEY", raising=False)
    with pytest.raises(SearchAuthError):
        GoogleCustomSearch(cx="C")


def test_dense_service_client():
    def handler(request):
        body = json.loads(request.content)
        return httpx.Response(200, json={"passages": [
            {"id": i, "title": f"t{i}", "text": f"p{i}", "score": 1.0 / (i + 1)} for i in range(body["k"] + 2)
        ]})

    hits = retrieve_wikipedia("q", 3, DenseServiceRetriever("http://svc/retrieve", transport=httpx.MockTransport(handler)))
    assert [h.doc_id for h in hits] == ["0", "1", "2"]


def test_dense_service_unreachable():
    def handler(request):
        raise httpx.ConnectError("refused", request=request)

    with pytest.raises(RetrievalError):
        DenseServiceRetriever("http://svc", transport=httpx.MockTransport(handler)).retrieve("q", 3)


# ------------------------------------------------------------------ pool construction

class _Fixed:
    def __init__(self, n, fail=False):
        self.n, self.fail = n, fail

    def retrieve(self, q, k):
        if self.fail:
            raise RetrievalError("down")
        return [Hit(f"w{i}", f"wiki {i}", url="ignored") for i in range(min(k, self.n))]

    def search(self, q, k):
        if self.fail:
            raise RetrievalError("down")
        return [Hit(f"g{i}", f"google {i}", title="t", url=f"https://g/{i}") for i in range(min(k, self.n))]


def test_mode_none_is_empty():
    pool = build_pool("q", "none", _Fixed(10), _Fixed(10))
    assert len(pool) == 0 and pool.failures == ()


def test_mode_all_orders_google_then_wiki():
    pool = build_pool("q", RetrievalMode.ALL, _Fixed(20), _Fixed(20), k_google=5, k_wiki=10)
    assert len(pool) == 15
    assert [e.pool_index for e in pool.items] == list(range(15))
    assert [e.source for e in pool.items] == [Source.GOOGLE] * 5 + [Source.WIKIPEDIA] * 10
    assert pool.items[0].url == "https://g/0" and pool.items[5].url is None
    assert pool.count(Source.GOOGLE) <= 5 and pool.count(Source.WIKIPEDIA) <= 10


def test_mode_google_fewer_hits_than_k():
    pool = build_pool("q", "google", None, _Fixed(3), k_google=5)
    assert [e.pool_index for e in pool.items] == [0, 1, 2]


def test_one_source_failing_keeps_the_other():
    pool = build_pool("q", "all", _Fixed(4), _Fixed(0, fail=True))
    assert len(pool) == 4 and all(e.source is Source.WIKIPEDIA for e in pool.items)
    assert len(pool.failures) == 1 and pool.failures[0].startswith("google")


def test_both_failing_gives_empty_pool():
    pool = build_pool("q", "all", _Fixed(4, fail=True), _Fixed(4, fail=True))
    assert len(pool) == 0 and len(pool.failures) == 2


def test_google_snippet_only(fixtures):
    pool = build_pool(MOON_Q, "google", None, FixtureSearch(fixtures / "search_moon.json"), k_google=5)
    assert len(pool) == 5
    assert all(e.source is Source.GOOGLE for e in pool.items)
    assert pool.items[1].text.endswith("Buzz Aldrin ...")


def test_pool_is_deterministic():
    a = build_pool("q", "all", _Fixed(7), _Fixed(7))
    b = build_pool("q", "all", _Fixed(7), _Fixed(7))
    assert a == b


def test_pool_rejects_non_contiguous_indices():
    from ragdebate.evidence import Evidence

    with pytest.raises(ValueError):
        EvidencePool("q", (Evidence(1, Source.GOOGLE, "x"),))


def test_pool_roundtrip():
    pool = build_pool("q", "all", _Fixed(2), _Fixed(2), question_id="id1")
    assert EvidencePool.from_dict(json.loads(json.dumps(pool.to_dict()))) == pool


# ------------------------------------------------------------------ self-selection

def _selector(reply):
    return ScriptedBackend.from_table({(Purpose.SELECTION, None, None): reply})


def test_select_evidence_paper_case():
    b = _selector('[1] "Letters to Cleo" - members ... [3] "Screaming Trees" - four members')
    res = select_evidence(make_pool(5), "Which band had more members?", b, 3, "Agent_1", 1)
    assert res.indices == (1, 3) and not res.no_found
    prompt = b.requests[0].user_prompt
    assert "(0) passage 0" in prompt and "(4) passage 4" in prompt
    assert b.requests[0].tag.purpose is Purpose.SELECTION


def test_select_evidence_no_found():
    res = select_evidence(make_pool(5), "q", _selector("... [No Found]"), 3)
    assert res.no_found and res.indices == ()


def test_select_evidence_dedupe_drop_cap():
    res = select_evidence(make_pool(5), "q", _selector("[2] [2] [7] [0] [4] [1]"), 3)
    assert res.indices == (2, 0, 4)


def test_select_evidence_unparseable_is_no_found():
    res = select_evidence(make_pool(5), "q", _selector("I like evidence two"), 3)
    assert res.no_found and not res.parsed


def test_select_evidence_empty_pool_skips_backend():
    b = _selector("[0]")
    res = select_evidence(make_pool(0), "q", b, 3)
    assert res.no_found and b.call_count == 0
