"""Experiment configuration and the run / ablate / report / replay drivers.

Output directory layout for one run::

    config.json          resolved ExperimentConfig, code version, config hash
    transcripts.jsonl    one DebateTranscript per line, in sample order
    results.jsonl        one EvalResult per line, in sample order
    errors.jsonl         per-sample failures that produced no transcript
    replay_cache.jsonl   every backend exchange (absent for replay runs)
    metrics.json         written atomically once the run completes
    metrics.csv, report.md
"""

from __future__ import annotations

import hashlib
import importlib
import itertools
import json
import logging
import os
import threading
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import yaml

from . import __version__
from .backends import (
    AuthError,
    CacheMiss,
    ChatBackend,
    OpenAIChatBackend,
    RecordingBackend,
    ReplayBackend,
    ReplayCache,
    ScriptedBackend,
    ScriptError,
)
from .backends.oracle import EvidenceOracle
from .config import DebateConfig
from .evaluation import (
    Dataset,
    EvalResult,
    Metrics,
    Sample,
    aggregate,
    grade,
    load_dataset,
    metrics_csv,
    results_table,
    sample_subset,
)
from .evidence import (
    DenseServiceRetriever,
    FixtureSearch,
    GoogleCustomSearch,
    LexicalRetriever,
    RetrievalMode,
    SerperSearch,
    build_pool,
)
from .protocol import Clock, frozen_clock, run_debate, utc_now
from .transcript import DebateTranscript

log = logging.getLogger(__name__)

RUN_SCHEMA_VERSION = 1
SYSTEMIC = (AuthError, CacheMiss, ScriptError)


class ConfigError(ValueError):
    pass


@dataclass
class BackendSettings:
    kind: str = "live"
    base_url: Optional[str] = None
    model: Optional[str] = None
    role_models: Dict[str, str] = field(default_factory=dict)
    max_retries: int = 5
    timeout: float = 60.0
    max_concurrency: int = 8
    requests_per_second: Optional[float] = None
    max_tokens: Optional[int] = None
    cache_path: Optional[str] = None
    script: Optional[str] = None
    script_options: Dict[str, Any] = field(default_factory=dict)
    eval_temperature: float = 0.0


@dataclass
class RetrievalSettings:
    corpus_path: Optional[str] = None
    dense_service_url: Optional[str] = None
    search_provider: str = "none"
    search_fixture_path: Optional[str] = None
    search_min_interval: float = 0.0


@dataclass
class ExperimentConfig:
    dataset: str = "hotpotqa"
    dataset_path: Optional[str] = None
    label: str = "debate"
    sample_size: Optional[int] = 500
    output_dir: str = "runs/debate"
    parallelism: int = 4
    clock: str = "auto"
    debate: DebateConfig = field(default_factory=DebateConfig)
    backend: BackendSettings = field(default_factory=BackendSettings)
    retrieval: RetrievalSettings = field(default_factory=RetrievalSettings)

    def __post_init__(self):
        Dataset(self.dataset)
        if self.backend.kind not in ("live", "scripted", "replay"):
            raise ConfigError(f"unknown backend kind {self.backend.kind!r}")
        if self.clock not in ("auto", "wall", "frozen"):
            raise ConfigError(f"unknown clock {self.clock!r}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["debate"] = self.debate.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ExperimentConfig":
        d = dict(d)
        try:
            debate = DebateConfig.from_dict(d.pop("debate", {}) or {})
            backend = _strict(BackendSettings, d.pop("backend", {}) or {})
            retrieval = _strict(RetrievalSettings, d.pop("retrieval", {}) or {})
            return _strict(cls, d, debate=debate, backend=backend, retrieval=retrieval)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def method_hash(self) -> str:
        """Hash of the settings that define the method, not where it ran."""
        ident = {
            "debate": self.debate.to_dict(),
            "backend": {k: getattr(self.backend, k) for k in ("kind", "model", "role_models", "script", "script_options")},
            "retrieval": {
                "search_provider": self.retrieval.search_provider,
                "wiki": "dense_service" if self.retrieval.dense_service_url else ("lexical" if self.retrieval.corpus_path else None),
            },
        }
        blob = json.dumps(ident, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def resolved_clock(self) -> Clock:
        frozen = self.clock == "frozen" or (self.clock == "auto" and self.backend.kind in ("scripted", "replay"))
        return frozen_clock() if frozen else utc_now


def _strict(cls, d: Mapping[str, Any], **extra):
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {', '.join(sorted(unknown))}")
    return cls(**dict(d), **extra)


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return data


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = v
    return out


# --------------------------------------------------------------------------- building blocks


def build_retrievers(cfg: ExperimentConfig):
    mode = cfg.debate.retrieval_mode
    wiki = search = None
    r = cfg.retrieval
    if mode.uses_wiki:
        if r.dense_service_url:
            wiki = DenseServiceRetriever(r.dense_service_url)
        elif r.corpus_path:
            if not Path(r.corpus_path).exists():
                raise ConfigError(f"corpus snapshot not found: {r.corpus_path}")
            wiki = LexicalRetriever.from_jsonl(r.corpus_path)
        else:
            raise ConfigError(f"retrieval_mode={mode.value} needs retrieval.corpus_path or retrieval.dense_service_url")
    if mode.uses_google:
        provider = r.search_provider
        if provider == "fixture":
            if not r.search_fixture_path or not Path(r.search_fixture_path).exists():
                raise ConfigError("search_provider=fixture needs an existing retrieval.search_fixture_path")
            search = FixtureSearch(r.search_fixture_path)
        elif provider == "google_cse":
            search = GoogleCustomSearch(min_interval=r.search_min_interval)
        elif provider == "serper":
            search = SerperSearch(min_interval=r.search_min_interval)
        else:
            raise ConfigError(f"retrieval_mode={mode.value} needs a search_provider (fixture, google_cse, serper)")
    return wiki, search


def _oracle_responder(samples: Sequence[Sample], **options) -> EvidenceOracle:
    answers = {s.debate_question: (s.gold_label or s.gold_answers[0]) for s in samples}
    return EvidenceOracle(answers, **options)


def build_responder(settings: BackendSettings, samples: Sequence[Sample]) -> Callable:
    """Resolve ``backend.script``: ``"oracle"`` or ``"package.module:factory"``."""
    script = settings.script
    if not script:
        raise ConfigError("backend.kind=scripted needs backend.script")
    if script == "oracle":
        return _oracle_responder(samples, **settings.script_options)
    module_name, _, attr = script.partition(":")
    if not attr:
        raise ConfigError(f"backend.script must look like 'module:factory', got {script!r}")
    factory = getattr(importlib.import_module(module_name), attr)
    return factory(samples=samples, **settings.script_options)


def build_backend(cfg: ExperimentConfig, samples: Sequence[Sample], out_dir: Path) -> ChatBackend:
    b = cfg.backend
    cache_path = Path(b.cache_path) if b.cache_path else out_dir / "replay_cache.jsonl"
    if b.kind == "replay":
        if not cache_path.exists():
            raise ConfigError(f"replay cache not found: {cache_path}")
        return ReplayBackend(ReplayCache(cache_path), strict=True)
    if b.kind == "scripted":
        inner: ChatBackend = ScriptedBackend(build_responder(b, samples))
    else:
        inner = OpenAIChatBackend(
            base_url=b.base_url,
            model=b.model,
            role_models=b.role_models,
            max_retries=b.max_retries,
            timeout=b.timeout,
            max_concurrency=b.max_concurrency,
            requests_per_second=b.requests_per_second,
            max_tokens=b.max_tokens,
        )
    return RecordingBackend(inner, ReplayCache(cache_path))


# --------------------------------------------------------------------------- run


@dataclass
class RunSummary:
    output_dir: Path
    metrics: Optional[Metrics]
    completed: int
    new: int
    errors: int
    systemic_error: Optional[str] = None

    @property
    def exit_code(self) -> int:
        return 1 if self.systemic_error else 0


def _read_jsonl(path: Path) -> List[Dict[str, Any]]:
    if not path.exists():
        return []
    with path.open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _prepare_output(cfg: ExperimentConfig, out: Path) -> set:
    """Write config.json and return ids already completed by an earlier run."""
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "schema_version": RUN_SCHEMA_VERSION,
        "code_version": __version__,
        "config_hash": cfg.method_hash(),
        "config": cfg.to_dict(),
    }
    cfg_path = out / "config.json"
    if cfg_path.exists():
        prev = json.loads(cfg_path.read_text(encoding="utf-8"))
        if prev.get("config_hash") != meta["config_hash"] or prev.get("config", {}).get("dataset") != cfg.dataset:
            raise ConfigError(f"{out} holds a run with a different configuration; use a fresh output_dir")
    _atomic_write(cfg_path, json.dumps(meta, indent=2, sort_keys=True) + "\n")

    done = {r["sample_id"] for r in _read_jsonl(out / "results.jsonl")}
    kept = [t for t in _read_jsonl(out / "transcripts.jsonl") if t["question_id"] in done]
    if (out / "transcripts.jsonl").exists():
        _atomic_write(out / "transcripts.jsonl", "".join(json.dumps(t, ensure_ascii=False) + "\n" for t in kept))
    if done:
        log.info("resuming %s: %d samples already complete", out, len(done))
    return done


class _OrderedWriter:
    """Appends per-sample records in sample order as soon as a prefix is complete."""

    def __init__(self, out: Path, order: Sequence[str]):
        self.out = out
        self.order = list(order)
        self.pending: Dict[str, Tuple[Optional[DebateTranscript], Optional[EvalResult], Optional[str]]] = {}
        self.next = 0
        self.lock = threading.Lock()

    def put(self, sid: str, transcript=None, result=None, error=None) -> None:
        with self.lock:
            self.pending[sid] = (transcript, result, error)
            while self.next < len(self.order) and self.order[self.next] in self.pending:
                t, r, e = self.pending.pop(self.order[self.next])
                self._write(self.order[self.next], t, r, e)
                self.next += 1

    def _write(self, sid, t, r, e) -> None:
        if e is not None:
            with (self.out / "errors.jsonl").open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"sample_id": sid, "error": e}, ensure_ascii=False) + "\n")
            return
        with (self.out / "transcripts.jsonl").open("a", encoding="utf-8") as fh:
            fh.write(t.to_json() + "\n")
        with (self.out / "results.jsonl").open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")


def run_sample(
    sample: Sample,
    cfg: ExperimentConfig,
    backend: ChatBackend,
    wiki=None,
    search=None,
    clock: Optional[Clock] = None,
) -> Tuple[DebateTranscript, EvalResult]:
    d = cfg.debate
    question = sample.debate_question
    pool = build_pool(question, d.retrieval_mode, wiki, search, d.k_google, d.k_wiki, sample.id)
    transcript = run_debate(question, pool, d, backend, sample.id, clock or cfg.resolved_clock)
    predicted = transcript.final_answer if transcript.usable else ""
    result = grade(sample, predicted, transcript.consensus_reached, backend, cfg.backend.eval_temperature)
    return transcript, result


def load_samples(cfg: ExperimentConfig) -> List[Sample]:
    if not cfg.dataset_path:
        raise ConfigError("dataset_path is required")
    if not Path(cfg.dataset_path).exists():
        raise ConfigError(f"dataset file not found: {cfg.dataset_path}")
    samples = load_dataset(cfg.dataset_path, cfg.dataset)
    if cfg.sample_size is not None and cfg.sample_size < len(samples):
        samples = sample_subset(samples, cfg.sample_size, cfg.debate.seed)
    elif cfg.sample_size is not None and cfg.sample_size > len(samples):
        raise ConfigError(f"sample_size {cfg.sample_size} exceeds the {len(samples)} samples in {cfg.dataset_path}")
    return samples


def run_experiment(cfg: ExperimentConfig, backend: Optional[ChatBackend] = None) -> RunSummary:
    """Run (or resume) every sampled debate and write the run directory.

    ``backend`` overrides the configured one; tests pass scripted backends here.
    """
    samples = load_samples(cfg)
    wiki, search = build_retrievers(cfg)
    out = Path(cfg.output_dir)
    done = _prepare_output(cfg, out)
    if backend is None:
        backend = build_backend(cfg, samples, out)

    todo = [s for s in samples if s.id not in done]
    writer = _OrderedWriter(out, [s.id for s in todo])
    errors = 0
    systemic: Optional[str] = None
    clock = cfg.resolved_clock

    def work(sample: Sample) -> None:
        nonlocal errors
        try:
            t, r = run_sample(sample, cfg, backend, wiki, search, clock)
        except SYSTEMIC:
            raise
        except Exception as exc:  # per-sample failure; recorded, run continues
            log.exception("sample %s failed", sample.id)
            with writer.lock:
                errors += 1
            writer.put(sample.id, error=f"{type(exc).__name__}: {exc}")
            return
        writer.put(sample.id, t, r)

    with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
        futures = [pool.submit(work, s) for s in todo]
        finished, _ = wait(futures, return_when=FIRST_EXCEPTION)
        for f in futures:
            if f.done() and f.exception() is not None:
                systemic = f"{type(f.exception()).__name__}: {f.exception()}"
                break
        if systemic:
            for f in futures:
                f.cancel()

    if not systemic and todo and errors == len(todo):
        systemic = f"all {errors} samples failed; see errors.jsonl"

    metrics = write_metrics(cfg, out)
    completed = len(_read_jsonl(out / "results.jsonl"))
    return RunSummary(out, metrics, completed, completed - len(done), errors, systemic)


def write_metrics(cfg: ExperimentConfig, out: Path) -> Optional[Metrics]:
    results = [EvalResult.from_dict(r) for r in _read_jsonl(out / "results.jsonl")]
    if not results:
        log.warning("%s has no results; metrics not written", out)
        return None
    transcripts = [DebateTranscript.from_dict(t) for t in _read_jsonl(out / "transcripts.jsonl")]
    metrics = aggregate(results, transcripts, cfg.dataset, cfg.label)
    doc = {"schema_version": RUN_SCHEMA_VERSION, "config_hash": cfg.method_hash(), **metrics.to_dict()}
    _atomic_write(out / "metrics.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _atomic_write(out / "metrics.csv", metrics_csv([metrics]))
    _atomic_write(out / "report.md", results_table([metrics]))
    return metrics


# --------------------------------------------------------------------------- ablation

AXES = ("retrieval_mode", "self_selection", "n_agents", "max_rounds")
_AXIS_FIELD = {"self_selection": "self_selection_enabled"}


def _axis_text(axis: str, value: Any) -> str:
    if axis == "self_selection":
        return "on" if value else "off"
    return str(getattr(value, "value", value))


def enumerate_grid(grid: Mapping[str, Sequence[Any]]) -> List[Dict[str, Any]]:
    """Cartesian product of the grid in canonical axis order."""
    if not grid:
        raise ConfigError("ablation grid is empty")
    unknown = set(grid) - set(AXES)
    if unknown:
        raise ConfigError(f"unknown ablation axes: {', '.join(sorted(unknown))}")
    axes = [a for a in AXES if a in grid]
    values = []
    for a in axes:
        vals = list(grid[a])
        if not vals:
            raise ConfigError(f"ablation axis {a} has no values")
        if a == "self_selection":
            vals = [v if isinstance(v, bool) else str(v).lower() in ("on", "true", "1", "yes") for v in vals]
        if a == "retrieval_mode":
            vals = [RetrievalMode(v) for v in vals]
        values.append(vals)
    return [dict(zip(axes, combo)) for combo in itertools.product(*values)]


@dataclass
class AblationCell:
    settings: Dict[str, Any]
    summary: RunSummary

    def describe(self) -> str:
        return ",".join(f"{a}={_axis_text(a, v)}" for a, v in self.settings.items())


def ablation_tables(cells: Sequence[AblationCell]) -> str:
    axes = list(cells[0].settings)
    parts = []
    for axis in axes:
        others = [a for a in axes if a != axis]
        ordered = sorted(
            cells,
            key=lambda c: ([_sort_key(c.settings[o]) for o in others], _sort_key(c.settings[axis])),
        )
        header = [axis] + others + ["accuracy", "inconsistent_count", "mean_rounds"]
        lines = [f"### Effect of {axis}", "", "| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        for c in ordered:
            m = c.summary.metrics
            row = [_axis_text(axis, c.settings[axis])] + [_axis_text(o, c.settings[o]) for o in others]
            row += [f"{m.accuracy:.3f}", str(m.inconsistent_count), f"{m.mean_rounds:.2f}"] if m else ["--", "--", "--"]
            lines.append("| " + " | ".join(row) + " |")
        parts.append("\n".join(lines) + "\n")
    return "\n".join(parts)


def _sort_key(v: Any):
    if isinstance(v, RetrievalMode):
        return list(RetrievalMode).index(v)
    return v


def run_ablation(cfg: ExperimentConfig, grid: Mapping[str, Sequence[Any]], backend_factory=None) -> List[AblationCell]:
    """One run per grid cell, each in its own subdirectory of ``cfg.output_dir``.

    ``backend_factory(cell_config)`` may supply a backend per cell.
    """
    combos = enumerate_grid(grid)
    base = Path(cfg.output_dir)
    cells: List[AblationCell] = []
    for i, settings in enumerate(combos):
        overrides = {_AXIS_FIELD.get(a, a): v for a, v in settings.items()}
        desc = ",".join(f"{a}={_axis_text(a, v)}" for a, v in settings.items())
        slug = desc.replace(",", "_").replace("=", "-")
        cell_cfg = replace(
            cfg,
            debate=replace(cfg.debate, **overrides),
            label=f"{cfg.label} [{desc}]",
            output_dir=str(base / f"cell{i:02d}_{slug}"),
        )
        backend = backend_factory(cell_cfg) if backend_factory else None
        cells.append(AblationCell(settings, run_experiment(cell_cfg, backend)))
    base.mkdir(parents=True, exist_ok=True)
    _atomic_write(base / "ablation.md", ablation_tables(cells))
    rows = [c.summary.metrics for c in cells if c.summary.metrics]
    _atomic_write(base / "ablation.csv", metrics_csv(rows))
    return cells


# --------------------------------------------------------------------------- report


class ReportError(ValueError):
    pass


def build_report(output_dirs: Iterable[Union[str, Path]]) -> Tuple[str, str, List[Metrics]]:
    """Merge run directories into Markdown and CSV tables.

    Directories without results are skipped with a warning. Two runs that
    share a label must share a method hash.
    """
    rows: List[Metrics] = []
    hashes: Dict[str, Tuple[str, Path]] = {}
    for d in map(Path, output_dirs):
        mpath = d / "metrics.json"
        if not mpath.exists():
            log.warning("%s has no metrics.json; excluded", d)
            continue
        doc = json.loads(mpath.read_text(encoding="utf-8"))
        if doc.get("schema_version") != RUN_SCHEMA_VERSION:
            raise ReportError(f"{d}: schema_version {doc.get('schema_version')!r} != {RUN_SCHEMA_VERSION}")
        m = Metrics.from_dict(doc)
        if m.n == 0:
            log.warning("%s has zero results; excluded", d)
            continue
        prev = hashes.get(m.label)
        if prev and prev[0] != doc.get("config_hash"):
            raise ReportError(f"label {m.label!r} has conflicting configurations in {prev[1]} and {d}")
        hashes[m.label] = (doc.get("config_hash"), d)
        if any(r.label == m.label and r.dataset == m.dataset for r in rows):
            log.warning("%s duplicates label %r on %s; keeping the first", d, m.label, m.dataset)
            continue
        rows.append(m)
    datasets = [ds.value for ds in Dataset if any(r.dataset == ds.value for r in rows)]
    return results_table(rows, datasets), metrics_csv(rows), rows


# --------------------------------------------------------------------------- replay


@dataclass
class ReplayOutcome:
    question_id: str
    ok: bool
    diffs: List[str] = field(default_factory=list)
    error: Optional[str] = None


def first_differences(a: Any, b: Any, path: str = "", limit: int = 10) -> List[str]:
    out: List[str] = []

    def walk(x, y, p):
        if len(out) >= limit:
            return
        if isinstance(x, dict) and isinstance(y, dict):
            for k in list(dict.fromkeys(list(x) + list(y))):
                walk(x.get(k), y.get(k), f"{p}.{k}" if p else k)
        elif isinstance(x, list) and isinstance(y, list):
            for i in range(max(len(x), len(y))):
                walk(x[i] if i < len(x) else None, y[i] if i < len(y) else None, f"{p}[{i}]")
        elif x != y:
            out.append(f"{p}: stored={x!r:.80} replayed={y!r:.80}")

    walk(a, b, path)
    return out


def load_transcripts(path: Union[str, Path]) -> List[DebateTranscript]:
    path = Path(path)
    text = path.read_text(encoding="utf-8").strip()
    if not text:
        return []
    if path.suffix == ".json":
        return [DebateTranscript.from_json(text)]
    return [DebateTranscript.from_json(line) for line in text.splitlines() if line.strip()]


def replay_transcripts(transcript_path: Union[str, Path], cache_path: Union[str, Path, None] = None) -> List[ReplayOutcome]:
    """Re-run each stored debate against cached responses and compare bytes."""
    transcript_path = Path(transcript_path)
    cache_path = Path(cache_path) if cache_path else transcript_path.parent / "replay_cache.jsonl"
    if not cache_path.exists():
        raise CacheMiss(f"replay cache not found: {cache_path}")
    cache = ReplayCache(cache_path)
    outcomes = []
    for stored in load_transcripts(transcript_path):
        stamps = iter([stored.started_at, stored.finished_at])
        try:
            rerun = run_debate(
                stored.question, stored.pool, stored.config, ReplayBackend(cache, strict=True),
                stored.question_id, lambda: next(stamps),
            )
        except CacheMiss as exc:
            outcomes.append(ReplayOutcome(stored.question_id, False, error=f"cache miss: {exc}"))
            continue
        if rerun.to_json() == stored.to_json():
            outcomes.append(ReplayOutcome(stored.question_id, True))
        else:
            outcomes.append(ReplayOutcome(stored.question_id, False, first_differences(stored.to_dict(), rerun.to_dict())))
    return outcomes
