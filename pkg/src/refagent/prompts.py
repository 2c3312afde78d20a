"""Prompt assembly for the planner and generator agents.

Section boundaries are stable markers so ablation runs can be verified
against golden prompt snapshots: each ablation flag removes exactly one
section and leaves the rest byte-identical.
"""

from __future__ import annotations

from typing import Optional

from .depgraph import CodeBundle, DependencyGraph
from .gateway import RefactoringPlan
from .metrics import MetricVector

PLANNER_SYSTEM = (
    "You are a software refactoring planner. Inspect the target Java class "
    "and propose refactorings that improve its design without changing "
    "behavior."
)

GENERATOR_SYSTEM = (
    "You are a refactoring engineer. Apply the given refactoring plan to the "
    "target Java class and return the complete refactored class."
)

SECTION_TARGET = "## Target class"
SECTION_GRAPH = "## Dependency graph"
SECTION_METRICS = "## Design metrics"
SECTION_DEPENDENTS = "## Dependent class sources"
SECTION_OUTPUT = "## Output format"
SECTION_PLAN = "## Refactoring plan"
SECTION_COMPILE_ERRORS = "## Compilation errors"
SECTION_TEST_FAILURES = "## Test failures"

PLAN_OUTPUT_INSTRUCTION = """Respond with a fenced JSON block holding a list of plan entries:
```json
[{"region_kind": "method", "identifier": "name(signature)", "line_range": [start, end], "refactoring_type": "Extract Method", "instruction": "..."}]
```
region_kind must be one of class, method, field, variable."""

CODE_OUTPUT_INSTRUCTION = (
    "Return the full refactored class in a single fenced ```java block."
)


def metrics_table(metrics: MetricVector) -> str:
    rows = [f"{name}: {value:g}" for name, value in metrics.as_dict().items()]
    return "\n".join(rows)


def graph_summary(graph: DependencyGraph, fqn: str) -> str:
    lines = [
        f"{src} -> {dst} ({kind})"
        for src, dst, kind in sorted(graph.edges)
        if src == fqn or dst == fqn
    ]
    return "\n".join(lines) if lines else "(no project-internal dependencies)"


def build_planner_prompt(
    bundle: CodeBundle,
    metrics: Optional[MetricVector],
    graph_text: Optional[str],
    include_metrics: bool = True,
    include_graph: bool = True,
    include_dependents: bool = True,
) -> str:
    parts = [
        f"Plan refactorings for class {bundle.target_fqn}.",
        f"{SECTION_TARGET}\n```java\n{bundle.target_source}```",
    ]
    if include_graph and graph_text is not None:
        parts.append(f"{SECTION_GRAPH}\n{graph_text}")
    if include_metrics and metrics is not None:
        parts.append(f"{SECTION_METRICS}\n{metrics_table(metrics)}")
    if include_dependents:
        dep_blocks = [
            f"// {dep_fqn}\n```java\n{source}```"
            for dep_fqn, source in sorted(bundle.dependent_sources.items())
        ]
        body = "\n".join(dep_blocks) if dep_blocks else "(none)"
        parts.append(f"{SECTION_DEPENDENTS}\n{body}")
    parts.append(f"{SECTION_OUTPUT}\n{PLAN_OUTPUT_INSTRUCTION}")
    return "\n\n".join(parts)


def plan_text(plan: RefactoringPlan) -> str:
    lines = []
    for entry in plan.entries:
        lines.append(
            f"- {entry.refactoring_type} on {entry.region_kind} "
            f"{entry.identifier} (lines {entry.line_range[0]}-{entry.line_range[1]}): "
            f"{entry.instruction}"
        )
    return "\n".join(lines)


def build_generator_prompt(
    plan: RefactoringPlan,
    bundle: CodeBundle,
    context_kind: str,  # initial | compile_fix | test_fix
    error_summary: str = "",
    detail: str = "",
) -> str:
    # the plan is restated in every variant; it remains the guiding principle
    parts = [
        f"Refactor class {bundle.target_fqn} following the plan below.",
        f"{SECTION_PLAN}\n{plan_text(plan)}",
        f"{SECTION_TARGET}\n```java\n{bundle.target_source}```",
    ]
    if context_kind == "compile_fix":
        body = error_summary if not detail else f"{error_summary}\n{detail}"
        parts.append(
            f"{SECTION_COMPILE_ERRORS}\nThe previous candidate failed to "
            f"compile. Fix these errors while keeping the plan:\n{body}"
        )
    elif context_kind == "test_fix":
        body = error_summary if not detail else f"{error_summary}\n{detail}"
        parts.append(
            f"{SECTION_TEST_FAILURES}\nThe previous candidate broke tests. "
            f"Fix these failures while keeping the plan:\n{body}"
        )
    parts.append(f"{SECTION_OUTPUT}\n{CODE_OUTPUT_INSTRUCTION}")
    return "\n\n".join(parts)
