import json
import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import consensus_backend, make_pool
from ragdebate import DebateConfig, run_debate
from ragdebate.backends import Purpose, ScriptedBackend
from ragdebate.evaluation import (
    FACT_CHECK_INSTRUCTION,
    Dataset,
    EvalResult,
    Grader,
    Metrics,
    Task,
    aggregate,
    exact_match,
    grade,
    grader_for,
    llm_judge_eval,
    load_dataset,
    metrics_csv,
    results_table,
    sample_subset,
)
from ragdebate.evaluation.datasets import FEVEROUS_ALIASES, Sample
from ragdebate.protocol import frozen_clock


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


# ------------------------------------------------------------------ loaders

def test_fever_labels_normalized(tmp_path):
    p = write_jsonl(tmp_path / "f.jsonl", [{"id": 1, "claim": "Sky is green.", "label": "supports"}])
    (s,) = load_dataset(p, "fever")
    assert s.gold_label == "SUPPORTS" and s.task is Task.FACT_CHECK
    assert s.debate_question == FACT_CHECK_INSTRUCTION + "Sky is green."


def test_feverous_aliases_at_load(tmp_path):
    p = write_jsonl(tmp_path / "f.jsonl", [
        {"id": "a", "claim": "c1", "label": "REFUTED"},
        {"id": "b", "claim": "c2", "label": "NOT ENOUGH INFORMATION"},
    ])
    assert [s.gold_label for s in load_dataset(p, "feverous")] == ["REFUTES", "NOT ENOUGH INFO"]


def test_unknown_label_reports_line(tmp_path):
    p = write_jsonl(tmp_path / "f.jsonl", [{"id": 1, "claim": "c", "label": "SUPPORTS"}, {"id": 2, "claim": "c", "label": "MAYBE"}])
    with pytest.raises(ValueError, match=r":2:.*MAYBE"):
        load_dataset(p, "fever")


def test_triviaqa_alias_dict(tmp_path):
    p = write_jsonl(tmp_path / "t.jsonl", [{
        "question_id": "tc_1", "question": "Who wrote Hamlet?",
        "answer": {"value": "William Shakespeare", "aliases": ["Shakespeare", "William Shakespeare", "The Bard"]},
    }])
    (s,) = load_dataset(p, "triviaqa")
    assert s.gold_answers == ("William Shakespeare", "Shakespeare", "The Bard")
    assert s.task is Task.SINGLE_HOP


@pytest.mark.parametrize("dataset,row", [
    ("nq", {"id": "n1", "question": "q", "answers": ["a", "b"]}),
    ("hotpotqa", {"_id": "h1", "question": "q", "answer": "a"}),
    ("2wikimultihopqa", {"_id": "w1", "question": "q", "answer": "a"}),
])
def test_qa_adapters(tmp_path, dataset, row):
    (s,) = load_dataset(write_jsonl(tmp_path / "d.jsonl", [row]), dataset)
    assert s.id == (row.get("id") or row.get("_id")) and s.gold_answers[0] == "a"


def test_malformed_line_number(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text('{"_id": "1", "question": "q", "answer": "a"}\n\n{not json\n')
    with pytest.raises(ValueError, match=r"d\.jsonl:3:"):
        load_dataset(p, "hotpotqa")


def test_missing_answer_rejected(tmp_path):
    p = write_jsonl(tmp_path / "d.jsonl", [{"_id": "1", "question": "q"}])
    with pytest.raises(ValueError, match=":1:"):
        load_dataset(p, "hotpotqa")


def test_empty_file_warns(tmp_path, caplog):
    p = tmp_path / "d.jsonl"
    p.write_text("")
    with caplog.at_level(logging.WARNING):
        assert load_dataset(p, "nq") == []
    assert "empty" in caplog.text


def _qa(i):
    return Sample(str(i), f"q{i}", Task.SINGLE_HOP, Dataset.NQ, gold_answers=("a",))


def test_sample_subset_deterministic_and_ordered():
    pool = [_qa(i) for i in range(1000)]
    a = sample_subset(pool, 500, seed=3)
    assert a == sample_subset(pool, 500, seed=3)
    assert len({s.id for s in a}) == 500
    assert [int(s.id) for s in a] == sorted(int(s.id) for s in a)
    assert a != sample_subset(pool, 500, seed=4)


def test_sample_subset_too_large():
    with pytest.raises(ValueError):
        sample_subset([_qa(0)], 2, 0)


# ------------------------------------------------------------------ graders

def test_grader_routing():
    assert grader_for("fever") is Grader.EM and grader_for("feverous") is Grader.EM
    assert all(grader_for(d) is Grader.LLM_JUDGE for d in ("triviaqa", "nq", "hotpotqa", "2wikimultihopqa"))


@pytest.mark.parametrize("predicted,gold,aliases,expected", [
    ("SUPPORTS", "SUPPORTS", None, True),
    (" supports ", "SUPPORTS", None, True),
    ("The claim is [REFUTES].", "REFUTES", None, True),
    ("[NOT ENOUGH INFO]", "NOT ENOUGH INFO", None, True),
    ("REFUTED", "REFUTES", None, False),
    ("REFUTED", "REFUTES", FEVEROUS_ALIASES, True),
    ("SUPPORTS", "REFUTES", None, False),
])
def test_exact_match(predicted, gold, aliases, expected):
    assert exact_match(predicted, gold, aliases) is expected


def _grader(reply):
    return ScriptedBackend.from_table({(Purpose.EVAL, None, None): reply})


def test_llm_judge_true_case():
    b = _grader("The evaluation answer names the helicopter. [True]")
    q = "What was the first sustained powered rotorcraft?"
    assert llm_judge_eval(q, ["helicopter"], "a helicopter", b) is True
    (r,) = b.requests
    assert r.temperature == 0.0 and r.tag.purpose is Purpose.EVAL
    assert "Reference answers: helicopter\nEvaluation answer: a helicopter\n" in r.user_prompt


def test_llm_judge_false_case():
    b = _grader("Cliff Gorman is not the reference. [False]")
    assert llm_judge_eval("Who played the role?", ["Dustin Hoffman"], "Cliff Gorman", b) is False


def test_llm_judge_exact_match_skips_backend():
    b = _grader("[False]")
    assert llm_judge_eval("q", ["Paris", "paris"], "Paris", b) is True
    assert b.call_count == 0


def test_llm_judge_unparseable_flags_review():
    s = _qa(1)
    r = grade(s, "b", True, _grader("hmm"))
    assert not r.correct and r.needs_review


def test_grade_fact_check_needs_no_backend():
    s = Sample("1", "c", Task.FACT_CHECK, Dataset.FEVER, gold_label="SUPPORTS")
    r = grade(s, "[SUPPORTS]", False)
    assert r.correct and r.grader is Grader.EM and not r.consensus_reached


def test_eval_result_roundtrip():
    r = EvalResult("x", "p", True, Grader.LLM_JUDGE, False, True)
    assert EvalResult.from_dict(json.loads(json.dumps(r.to_dict()))) == r


# ------------------------------------------------------------------ aggregation

def _transcripts(n, n_inconsistent):
    out = []
    for i in range(n):
        backend = consensus_backend(None if i < n_inconsistent else 1)
        out.append(run_debate("Q?", make_pool(2), DebateConfig(max_rounds=2), backend, f"q{i}", frozen_clock()))
    return out


def _results(n, n_correct, transcripts):
    return [EvalResult(f"q{i}", "p", i < n_correct, Grader.EM, transcripts[i].consensus_reached) for i in range(n)]


def test_aggregate_counts():
    ts = _transcripts(10, 3)
    m = aggregate(_results(10, 7, ts), ts, "fever", "full")
    assert m.accuracy == pytest.approx(0.7)
    assert m.inconsistent_count == 3
    assert m.n == 10
    assert m.mean_rounds == pytest.approx((3 * 2 + 7 * 1) / 10)
    assert m.mean_backend_calls == pytest.approx((3 * 11 + 7 * 6) / 10)


def test_aggregate_empty_raises():
    with pytest.raises(ValueError):
        aggregate([], [], "fever")


def test_aggregate_id_mismatch_raises():
    ts = _transcripts(3, 0)
    with pytest.raises(ValueError, match="disagree"):
        aggregate(_results(3, 1, ts), ts[:2], "fever")


_TS = _transcripts(8, 2)


@settings(max_examples=25, deadline=None)
@given(st.randoms(use_true_random=False))
def test_aggregate_permutation_invariant(rnd):
    results = _results(8, 5, _TS)
    base = aggregate(results, _TS, "nq")
    r2, t2 = list(results), list(_TS)
    rnd.shuffle(r2)
    rnd.shuffle(t2)
    assert aggregate(r2, t2, "nq") == base


def test_results_table_marks_best_and_second():
    rows = [Metrics("nq", 10, a, 0, 1.0, 5.0, label=lab) for lab, a in [("A", 0.5), ("B", 0.7), ("C", 0.6)]]
    table = results_table(rows)
    assert "| B | **0.700** |" in table and "| C | <u>0.600</u> |" in table and "| A | 0.500 |" in table


def test_metrics_csv_header():
    csv_text = metrics_csv([Metrics("nq", 1, 1.0, 0, 1.0, 4.0, label="x")])
    assert csv_text.splitlines()[0] == "label,dataset,n,accuracy,inconsistent_count,mean_rounds,mean_backend_calls,n_failed,n_review"
