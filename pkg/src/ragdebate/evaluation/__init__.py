from .datasets import (
    FACT_CHECK_INSTRUCTION,
    FACT_LABELS,
    FEVEROUS_ALIASES,
    Dataset,
    Sample,
    Task,
    adapter_for,
    load_dataset,
    normalize_label,
    sample_subset,
)
from .grading import EvalResult, Grader, exact_match, grade, grader_for, llm_judge_eval
from .metrics import Metrics, aggregate, metrics_csv, results_table

__all__ = [
    "FACT_CHECK_INSTRUCTION",
    "FACT_LABELS",
    "FEVEROUS_ALIASES",
    "Dataset",
    "EvalResult",
    "Grader",
    "Metrics",
    "Sample",
    "Task",
    "adapter_for",
    "aggregate",
    "exact_match",
    "grade",
    "grader_for",
    "llm_judge_eval",
    "load_dataset",
    "metrics_csv",
    "normalize_label",
    "results_table",
    "sample_subset",
]
