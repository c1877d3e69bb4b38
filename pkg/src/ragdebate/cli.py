"""``ragdebate`` command line: run, ablate, report, replay.

Settings come from an optional YAML/JSON config file; flags override it.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from .backends import BackendError
from .evidence.types import RetrievalError
from .experiment import (
    ConfigError,
    ExperimentConfig,
    ReportError,
    build_report,
    deep_merge,
    load_config_file,
    replay_transcripts,
    run_ablation,
    run_experiment,
)

log = logging.getLogger("ragdebate")

# flag dest -> (section, key); section None means top level
_FLAG_MAP = {
    "dataset": (None, "dataset"),
    "dataset_path": (None, "dataset_path"),
    "label": (None, "label"),
    "sample_size": (None, "sample_size"),
    "output_dir": (None, "output_dir"),
    "parallelism": (None, "parallelism"),
    "clock": (None, "clock"),
    "n_agents": ("debate", "n_agents"),
    "max_rounds": ("debate", "max_rounds"),
    "temperature": ("debate", "temperature"),
    "k_google": ("debate", "k_google"),
    "k_wiki": ("debate", "k_wiki"),
    "max_selected": ("debate", "max_selected"),
    "retrieval_mode": ("debate", "retrieval_mode"),
    "self_selection": ("debate", "self_selection_enabled"),
    "seed": ("debate", "seed"),
    "backend": ("backend", "kind"),
    "base_url": ("backend", "base_url"),
    "model": ("backend", "model"),
    "cache_path": ("backend", "cache_path"),
    "script": ("backend", "script"),
    "max_retries": ("backend", "max_retries"),
    "corpus": ("retrieval", "corpus_path"),
    "retriever_url": ("retrieval", "dense_service_url"),
    "search_provider": ("retrieval", "search_provider"),
    "search_fixture": ("retrieval", "search_fixture_path"),
}


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML or JSON experiment config")
    g = p.add_argument_group("experiment")
    g.add_argument("--dataset", choices=["triviaqa", "nq", "hotpotqa", "2wikimultihopqa", "fever", "feverous"])
    g.add_argument("--dataset-path")
    g.add_argument("--label")
    g.add_argument("--sample-size", type=int)
    g.add_argument("--output-dir")
    g.add_argument("--parallelism", type=int)
    g.add_argument("--clock", choices=["auto", "wall", "frozen"])
    g = p.add_argument_group("debate")
    g.add_argument("--n-agents", type=int)
    g.add_argument("--max-rounds", type=int)
    g.add_argument("--temperature", type=float)
    g.add_argument("--k-google", type=int)
    g.add_argument("--k-wiki", type=int)
    g.add_argument("--max-selected", type=int)
    g.add_argument("--retrieval-mode", choices=["none", "wiki", "google", "all"])
    g.add_argument("--self-selection", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--seed", type=int)
    g = p.add_argument_group("backend")
    g.add_argument("--backend", choices=["live", "scripted", "replay"])
    g.add_argument("--base-url")
    g.add_argument("--model")
    g.add_argument("--cache-path")
    g.add_argument("--script", help="'oracle' or 'package.module:factory' for --backend scripted")
    g.add_argument("--max-retries", type=int)
    g = p.add_argument_group("retrieval")
    g.add_argument("--corpus", help="JSONL passage snapshot for the lexical retriever")
    g.add_argument("--retriever-url", help="hosted passage retriever endpoint")
    g.add_argument("--search-provider", choices=["none", "fixture", "google_cse", "serper"])
    g.add_argument("--search-fixture")


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    data: Dict[str, Any] = load_config_file(args.config) if getattr(args, "config", None) else {}
    overrides: Dict[str, Any] = {}
    for dest, (section, key) in _FLAG_MAP.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if section is None:
            overrides[key] = value
        else:
            overrides.setdefault(section, {})[key] = value
    return ExperimentConfig.from_dict(deep_merge(data, overrides))


def _parse_grid(args: argparse.Namespace) -> Dict[str, List[Any]]:
    grid: Dict[str, List[Any]] = {}
    if args.grid:
        loaded = load_config_file(args.grid)
        grid.update(loaded.get("grid", loaded))
    for spec in args.axis or []:
        name, _, values = spec.partition("=")
        if not values:
            raise ConfigError(f"--axis expects name=v1,v2 (got {spec!r})")
        items: List[Any] = [v.strip() for v in values.split(",") if v.strip()]
        if name in ("n_agents", "max_rounds"):
            items = [int(v) for v in items]
        grid[name] = items
    return grid


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    summary = run_experiment(cfg)
    m = summary.metrics
    if m:
        print(f"{cfg.label} / {cfg.dataset}: n={m.n} accuracy={m.accuracy:.3f} inconsistent={m.inconsistent_count} "
              f"(new={summary.new}, errors={summary.errors}) -> {summary.output_dir}")
    if summary.systemic_error:
        print(f"run stopped: {summary.systemic_error}", file=sys.stderr)
    return summary.exit_code


def cmd_ablate(args) -> int:
    cfg = resolve_config(args)
    cells = run_ablation(cfg, _parse_grid(args))
    print((Path(cfg.output_dir) / "ablation.md").read_text(encoding="utf-8"))
    return 1 if any(c.summary.systemic_error for c in cells) else 0


def cmd_report(args) -> int:
    markdown, csv_text, rows = build_report(args.dirs)
    if not rows:
        print("no runs with results", file=sys.stderr)
        return 1
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.md").write_text(markdown, encoding="utf-8")
        (out / "report.csv").write_text(csv_text, encoding="utf-8")
    print(markdown if args.format == "markdown" else csv_text, end="")
    return 0


def cmd_replay(args) -> int:
    outcomes = replay_transcripts(args.transcript, args.cache)
    bad = 0
    for o in outcomes:
        if o.ok:
            print(f"PASS {o.question_id}")
            continue
        bad += 1
        print(f"FAIL {o.question_id}: {o.error or 'transcript diverged'}")
        for d in o.diffs:
            print(f"    {d}")
    print(f"{len(outcomes) - bad}/{len(outcomes)} transcripts replayed identically")
    return 1 if bad or not outcomes else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ragdebate", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run debates over a sampled dataset subset")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="one run per cell of an ablation grid")
    _add_experiment_flags(p)
    p.add_argument("--grid", type=Path, help="YAML/JSON mapping axis -> list of values")
    p.add_argument("--axis", action="append", help="axis=v1,v2 (repeatable)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="merge run directories into result tables")
    p.add_argument("dirs", nargs="+", type=Path)
    p.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    p.add_argument("--out", help="also write report.md and report.csv here")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("replay", help="re-execute stored debates from the replay cache")
    p.add_argument("transcript", type=Path, help="transcripts.jsonl or a single transcript .json")
    p.add_argument("--cache", type=Path, help="replay cache (default: replay_cache.jsonl beside the transcript)")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, ReportError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BackendError, RetrievalError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
