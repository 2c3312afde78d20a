"""Command-line entry point.

Subcommands: `analyze`, `graph`, `refactor`, `evaluate align`,
`evaluate quality`, `report`. Exit codes: 0 success, 1 domain error,
2 usage error (argparse prints the offending flag).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .config import build_config, load_config_file
from .depgraph import extract_dependencies, first_degree_dependents
from .errors import RefagentError
from .evaluation import (
    emit_reports,
    load_journal_records,
    load_miner_records,
    match_scenario1,
    match_scenario2,
)
from .metrics import MetricVector, aggregate_design_vector, compute_class_metrics
from .orchestrator import run_project, tree_digest
from .quality import qmood_attributes, quality_improvement
from .smells import detect_smells
from .source_model import load_project

logger = logging.getLogger(__name__)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refagent", description="Autonomous multi-agent Java refactoring engine"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="per-class metrics, smells, and quality attributes")
    p.add_argument("path", type=Path)
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--journal", type=Path, default=None)

    p = sub.add_parser("graph", help="emit the class dependency graph as JSON")
    p.add_argument("path", type=Path)
    p.add_argument("--target", default=None, help="also report the target's dependents")
    p.add_argument("--journal", type=Path, default=None)

    p = sub.add_parser("refactor", help="run refactoring sessions over a project")
    p.add_argument("path", type=Path)
    p.add_argument("--class", dest="target_class", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--backend", choices=["scripted", "replay", "http"], default=None)
    p.add_argument("--no-context", action="store_true")
    p.add_argument("--no-depgraph", action="store_true")
    p.add_argument("--no-codesearch", action="store_true")
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--journal", type=Path, default=None)

    p = sub.add_parser("evaluate", help="alignment and quality evaluation")
    esub = p.add_subparsers(dest="evaluate_command", required=True)

    e = esub.add_parser("align", help="compare engine output with detector records")
    e.add_argument("--ours", type=Path, required=True, help="engine journal directory")
    e.add_argument("--theirs", type=Path, required=True, help="detector JSON file")
    e.add_argument("--scenario", choices=["1", "2"], required=True)
    e.add_argument("--journal", type=Path, default=None)

    e = esub.add_parser("quality", help="quality attributes before vs after")
    e.add_argument("--before", type=Path, required=True)
    e.add_argument("--after", type=Path, required=True)
    e.add_argument("--out", type=Path, default=None)
    e.add_argument("--journal", type=Path, default=None)

    p = sub.add_parser("report", help="emit the CSV/JSON report set from a journal")
    p.add_argument("journal", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--miner", type=Path, default=None, help="detector JSON for alignment")

    return parser


# -- subcommand bodies -------------------------------------------------------


def _cmd_analyze(args) -> int:
    config = build_config(args.path)
    model, test_fqns = load_project(args.path, config.source_roots, config.test_roots)
    graph = extract_dependencies(model)

    columns = ["class"] + MetricVector.metric_names()
    rows = []
    per_class = {}
    for fqn in sorted(model.types):
        vector = compute_class_metrics(model, graph, fqn)
        per_class[fqn] = vector.as_dict()
        rows.append([fqn] + [vector.as_dict()[m] for m in MetricVector.metric_names()])

    smells = detect_smells(model, graph, config.thresholds)
    qmood = qmood_attributes(
        aggregate_design_vector(model, graph), config.coefficient_table
    )
    payload = {
        "classes": per_class,
        "smells": [s.to_json_dict() for s in smells],
        "qmood": qmood.values,
    }

    out = args.out or (args.path / ".refagent" / "analysis")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)
    (out / "analysis.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"{len(per_class)} classes, {len(smells)} smells; "
        f"reports in {out}"
    )
    return 0


def _cmd_graph(args) -> int:
    config = build_config(args.path)
    model, _ = load_project(args.path, config.source_roots, config.test_roots)
    graph = extract_dependencies(model)
    payload = graph.to_json_dict()
    if args.target is not None:
        payload["target"] = args.target
        payload["dependents"] = sorted(first_degree_dependents(graph, args.target))
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _cmd_refactor(args) -> int:
    workspace = args.path
    file_config = load_config_file(workspace)
    backend_data = dict(file_config.get("backend", {}))
    if args.backend is not None:
        kind = "http_chat" if args.backend == "http" else args.backend
        backend_data["kind"] = kind
    ablation_data = dict(file_config.get("ablation", {}))
    if args.no_context:
        ablation_data["context"] = False
    if args.no_depgraph:
        ablation_data["depgraph"] = False
    if args.no_codesearch:
        ablation_data["codesearch"] = False
    overrides = {"backend": backend_data, "ablation": ablation_data}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.journal is not None:
        overrides["journal_dir"] = str(args.journal)
    config = build_config(workspace, overrides)

    digest_before = tree_digest(workspace) if args.dry_run else None
    report = run_project(
        workspace, config, dry_run=args.dry_run, target=args.target_class
    )
    if args.dry_run and tree_digest(workspace) != digest_before:
        print("error: dry run modified the workspace", file=sys.stderr)
        return 1
    counts = report.verdict_counts
    summary = ", ".join(f"{k}={counts[k]}" for k in sorted(counts)) or "no sessions"
    print(f"seed {report.seed}: {summary}")
    return 0


def _cmd_align(args) -> int:
    ours = load_journal_records(args.ours)
    theirs = load_miner_records(args.theirs)
    if args.scenario == "1":
        ours_ranged = [r for r in ours if r.line_range]
        theirs_ranged = [r for r in theirs if r.line_range]
        dropped = (len(ours) - len(ours_ranged)) + (len(theirs) - len(theirs_ranged))
        if dropped:
            logger.warning("dropped %d records without line ranges", dropped)
        result = match_scenario1(ours_ranged, theirs_ranged)
    else:
        result = match_scenario2(ours, theirs)
    print(json.dumps(result.to_json_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_quality(args) -> int:
    rows = []
    vectors = []
    for snapshot in (args.before, args.after):
        config = build_config(snapshot)
        model, _ = load_project(snapshot, config.source_roots, config.test_roots)
        graph = extract_dependencies(model)
        vectors.append(
            qmood_attributes(
                aggregate_design_vector(model, graph), config.coefficient_table
            )
        )
    before, after = vectors
    qi = quality_improvement(before, after)
    for attribute in sorted(before.values):
        rows.append([attribute, before[attribute], after[attribute], qi[attribute]])
    payload = {
        attribute: {
            "before": before[attribute],
            "after": after[attribute],
            "quality_improvement": qi[attribute],
        }
        for attribute in sorted(before.values)
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        with open(args.out / "qmood_qi.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["attribute", "before", "after", "quality_improvement"])
            writer.writerows(rows)
        (args.out / "qmood_qi.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_report(args) -> int:
    miner = load_miner_records(args.miner) if args.miner is not None else None
    created = emit_reports(args.journal, args.out, miner_records=miner)
    for path in created:
        print(path)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "graph":
            return _cmd_graph(args)
        if args.command == "refactor":
            return _cmd_refactor(args)
        if args.command == "evaluate":
            if args.evaluate_command == "align":
                return _cmd_align(args)
            return _cmd_quality(args)
        if args.command == "report":
            return _cmd_report(args)
    except RefagentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
