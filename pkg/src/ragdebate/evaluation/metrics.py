from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence

from ..transcript import DebateTranscript
from .grading import EvalResult

METRIC_FIELDS = ("label", "dataset", "n", "accuracy", "inconsistent_count", "mean_rounds", "mean_backend_calls", "n_failed", "n_review")


@dataclass(frozen=True)
class Metrics:
    dataset: str
    n: int
    accuracy: float
    inconsistent_count: int
    mean_rounds: float
    mean_backend_calls: float
    n_failed: int = 0
    n_review: int = 0
    label: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Metrics":
        return cls(**{k: d[k] for k in METRIC_FIELDS if k in d})


def aggregate(
    results: Sequence[EvalResult],
    transcripts: Sequence[DebateTranscript],
    dataset: str,
    label: str = "",
) -> Metrics:
    """Reduce graded results and their transcripts to one metrics row.

    Results and transcripts must cover the same sample ids. A debate counts
    as inconsistent when its last round ended without consensus.
    """
    if not results:
        raise ValueError("no results to aggregate")
    by_id = {t.question_id: t for t in transcripts}
    result_ids = [r.sample_id for r in results]
    if len(set(result_ids)) != len(result_ids):
        raise ValueError("duplicate sample ids in results")
    if set(result_ids) != set(by_id) or len(by_id) != len(transcripts):
        missing = sorted(set(result_ids) ^ set(by_id))
        raise ValueError(f"results and transcripts disagree on sample ids: {missing[:5]}")
    n = len(results)
    matched = [by_id[i] for i in sorted(result_ids)]
    return Metrics(
        dataset=dataset,
        n=n,
        accuracy=sum(r.correct for r in results) / n,
        inconsistent_count=sum(1 for t in matched if not t.consensus_reached),
        mean_rounds=sum(len(t.rounds) for t in matched) / n,
        mean_backend_calls=sum(t.backend_call_count for t in matched) / n,
        n_failed=sum(1 for t in matched if not t.usable),
        n_review=sum(r.needs_review for r in results),
        label=label,
    )


def metrics_csv(rows: Sequence[Metrics]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(METRIC_FIELDS), lineterminator="\n")
    writer.writeheader()
    for m in rows:
        writer.writerow({k: getattr(m, k) for k in METRIC_FIELDS})
    return buf.getvalue()


def results_table(rows: Sequence[Metrics], datasets: Optional[Sequence[str]] = None) -> str:
    """Markdown table, one row per label and one accuracy column per dataset.

    The best score per dataset is bold and the runner-up underlined.
    """
    if datasets is None:
        datasets = list(dict.fromkeys(m.dataset for m in rows))
    labels = list(dict.fromkeys(m.label for m in rows))
    cell = {(m.label, m.dataset): m.accuracy for m in rows}
    ranks: Dict[str, List[float]] = {}
    for ds in datasets:
        ranks[ds] = sorted({v for (lab, d), v in cell.items() if d == ds}, reverse=True)

    lines = ["| Method | " + " | ".join(datasets) + " |", "|" + "---|" * (len(datasets) + 1)]
    for lab in labels:
        cells = []
        for ds in datasets:
            v = cell.get((lab, ds))
            if v is None:
                cells.append("--")
                continue
            text = f"{v:.3f}"
            if len(ranks[ds]) > 1 and v == ranks[ds][0]:
                text = f"**{text}**"
            elif len(ranks[ds]) > 2 and v == ranks[ds][1]:
                text = f"<u>{text}</u>"
            cells.append(text)
        lines.append(f"| {lab or '(unlabelled)'} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
