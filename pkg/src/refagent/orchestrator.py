"""Per-class agent session state machine and the project-level loop.

A session is: snapshot, optional test generation against the original,
plan, generate, bounded compile loop, bounded test loop, then commit or
revert. Both feedback loops are capped (default 20 attempts each);
recompiles triggered by test fixes consume the compile budget so the two
caps stay independently meaningful. Every session leaves a journal
sufficient to reconstruct the before/after snapshots.
"""

from __future__ import annotations

import difflib
import hashlib
import json
import logging
import random
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .config import EngineConfig
from .depgraph import (
    CodeBundle,
    DependencyGraph,
    collect_bundle,
    extract_dependencies,
    related_tests,
)
from .errors import (
    BaselineFailure,
    NoCodeBlock,
    PlanParseError,
    PlaybookExhausted,
    TargetOverBudget,
    ToolError,
)
from .gateway import (
    ChatMessage,
    ChatRequest,
    RefactoringPlan,
    Transcript,
    estimate_tokens,
    extract_code_block,
    extract_plan,
    make_backend,
)
from .metrics import MetricVector, aggregate_design_vector, compute_class_metrics
from .quality import qmood_attributes
from .prompts import (
    GENERATOR_SYSTEM,
    PLANNER_SYSTEM,
    build_generator_prompt,
    build_planner_prompt,
    graph_summary,
)
from .smells import detect_smells
from .source_model import DesignModel, load_project, parse_source
from .toolchain import (
    BuildOutcome,
    Diagnostic,
    StubTestGenerator,
    compile_project,
    generate_tests,
    run_tests,
)

logger = logging.getLogger(__name__)

PHASES = (
    "PLANNING", "GENERATING", "COMPILING", "TESTING",
    "COMMITTED", "REVERTED", "SKIPPED",
)
PLAN_REPROMPTS = 3


# -- workspace snapshots ----------------------------------------------


def _workspace_files(workspace: Path, exclude: tuple[str, ...]) -> list[Path]:
    files = []
    for path in sorted(workspace.rglob("*")):
        if not path.is_file():
            continue
        rel = path.relative_to(workspace)
        if any(part in exclude for part in rel.parts):
            continue
        files.append(path)
    return files


@dataclass
class Snapshot:
    workspace: Path
    contents: dict[str, bytes]
    digest: str

    @classmethod
    def take(cls, workspace: Path, exclude: tuple[str, ...] = (".refagent", ".git")) -> "Snapshot":
        workspace = Path(workspace)
        contents = {
            str(p.relative_to(workspace)): p.read_bytes()
            for p in _workspace_files(workspace, exclude)
        }
        return cls(workspace=workspace, contents=contents, digest=_digest_of(contents))

    def restore(self) -> None:
        """Put the tree back byte-identical, removing files added since."""
        exclude = (".refagent", ".git")
        current = {
            str(p.relative_to(self.workspace)): p
            for p in _workspace_files(self.workspace, exclude)
        }
        for rel, path in current.items():
            if rel not in self.contents:
                path.unlink()
        for rel, data in self.contents.items():
            path = self.workspace / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            if not path.exists() or path.read_bytes() != data:
                path.write_bytes(data)


def _digest_of(contents: dict[str, bytes]) -> str:
    h = hashlib.sha256()
    for rel in sorted(contents):
        h.update(rel.encode("utf-8"))
        h.update(hashlib.sha256(contents[rel]).digest())
    return h.hexdigest()


def tree_digest(workspace: Path, exclude: tuple[str, ...] = (".refagent", ".git")) -> str:
    workspace = Path(workspace)
    contents = {
        str(p.relative_to(workspace)): p.read_bytes()
        for p in _workspace_files(workspace, exclude)
    }
    return _digest_of(contents)


# -- session state -----------------------------------------------------


@dataclass
class AttemptRecord:
    kind: str  # initial | compile_fix | test_fix
    candidate_source: str
    verdict: str  # compile_fail | test_fail | pass | no_code_block
    error_summary: str = ""

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "candidate_source": self.candidate_source,
            "verdict": self.verdict,
            "error_summary": self.error_summary,
        }


@dataclass
class SessionState:
    target_fqn: str
    phase: str = "PLANNING"
    compile_attempts: int = 0
    test_attempts: int = 0
    attempts: list[AttemptRecord] = field(default_factory=list)
    transcript: Transcript = field(default_factory=Transcript)
    snapshot: Optional[Snapshot] = None
    plan: Optional[RefactoringPlan] = None
    advisory_entries: list = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    reason: str = ""


@dataclass
class SessionVerdict:
    target_fqn: str
    phase: str  # COMMITTED | REVERTED | SKIPPED
    compile_attempts: int
    test_attempts: int
    reason: str = ""

    def to_json_dict(self) -> dict:
        return {
            "target_fqn": self.target_fqn,
            "phase": self.phase,
            "compile_attempts": self.compile_attempts,
            "test_attempts": self.test_attempts,
            "reason": self.reason,
        }


class Journal:
    """Per-class session records plus a project manifest."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def class_dir(self, fqn: str) -> Path:
        path = self.root / fqn
        path.mkdir(parents=True, exist_ok=True)
        return path

    def write_json(self, fqn: str, name: str, payload) -> None:
        path = self.class_dir(fqn) / name
        path.write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def write_text(self, fqn: str, name: str, text: str) -> None:
        (self.class_dir(fqn) / name).write_text(text, encoding="utf-8")

    def write_manifest(self, payload: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "manifest.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


# -- error summarization ------------------------------------------------


def summarize_errors(
    diagnostics: list[Diagnostic],
    backend=None,
    transcript: Optional[Transcript] = None,
    token_budget: int = 512,
) -> str:
    """Deterministic digest: grouped by file, line-sorted, deduplicated.

    An optional LLM summary is appended to, never replaces, the digest.
    """
    by_file: dict[str, list[Diagnostic]] = {}
    for diag in diagnostics:
        by_file.setdefault(diag.file, []).append(diag)
    lines: list[str] = []
    for file in sorted(by_file):
        lines.append(f"{file}:")
        seen: dict[tuple[int, str], int] = {}
        order: list[tuple[int, str]] = []
        for diag in sorted(by_file[file], key=lambda d: (d.line, d.message)):
            key = (diag.line, diag.message)
            if key not in seen:
                seen[key] = 0
                order.append(key)
            seen[key] += 1
        for line, message in order:
            count = seen[(line, message)]
            suffix = f" (x{count})" if count > 1 else ""
            lines.append(f"  line {line}: {message}{suffix}")
    digest = "\n".join(lines)
    while estimate_tokens(digest) > token_budget and lines:
        lines = lines[:-1]
        digest = "\n".join(lines) + "\n  [truncated]"
    if backend is not None:
        request = ChatRequest(
            messages=[
                ChatMessage("system", "Summarize these compiler diagnostics."),
                ChatMessage("user", digest),
            ],
            meta={"agent": "compiler", "phase": "summarize", "attempt": 1},
        )
        response = backend.complete(request)
        if transcript is not None:
            transcript.record(request, response)
        digest = digest + "\n" + response.text.strip()
    return digest


def summarize_failures(failures, token_budget: int = 512) -> str:
    lines = [f"{f.test_id}: {f.message}" for f in failures]
    text = "\n".join(lines)
    while estimate_tokens(text) > token_budget and lines:
        lines = lines[:-1]
        text = "\n".join(lines) + "\n[truncated]"
    return text


# -- session context ----------------------------------------------------


@dataclass
class SessionContext:
    workspace: Path
    config: EngineConfig
    backend: object
    adapter: object
    journal: Journal
    model: DesignModel
    graph: DependencyGraph
    test_fqns: set[str]
    state: SessionState
    bundle: Optional[CodeBundle] = None
    generated_test_fqns: set[str] = field(default_factory=set)
    _gen_counters: dict[str, int] = field(default_factory=dict)

    @property
    def target_path(self) -> Path:
        unit = self.model.unit_of[self.state.target_fqn]
        return Path(unit.path)

    def chat(self, agent: str, phase: str, prompt: str, system: str) -> str:
        counter_key = f"{agent}:{phase}"
        self._gen_counters[counter_key] = self._gen_counters.get(counter_key, 0) + 1
        request = ChatRequest(
            messages=[ChatMessage("system", system), ChatMessage("user", prompt)],
            temperature=self.config.backend.temperature,
            meta={
                "agent": agent,
                "phase": phase,
                "attempt": self._gen_counters[counter_key],
            },
        )
        response = self.backend.complete(request)
        self.state.transcript.record(request, response)
        return response.text

    def install_candidate(self, source: str) -> None:
        self.target_path.write_text(source, encoding="utf-8")


# -- planning ------------------------------------------------------------


def plan_refactoring(ctx: SessionContext) -> Optional[RefactoringPlan]:
    """Planner call with bounded re-prompts; None means skip the class."""
    cfg = ctx.config
    metrics = None
    graph_text = None
    if cfg.ablation.context:
        metrics = compute_class_metrics(ctx.model, ctx.graph, ctx.state.target_fqn)
    if cfg.ablation.depgraph:
        graph_text = graph_summary(ctx.graph, ctx.state.target_fqn)
    prompt = build_planner_prompt(
        ctx.bundle,
        metrics,
        graph_text,
        include_metrics=cfg.ablation.context,
        include_graph=cfg.ablation.depgraph,
        include_dependents=cfg.ablation.codesearch,
    )
    ctx.journal.write_text(ctx.state.target_fqn, "planner_prompt.txt", prompt)

    last_error = ""
    for _ in range(PLAN_REPROMPTS):
        text = ctx.chat("planner", "initial", prompt + last_error, PLANNER_SYSTEM)
        try:
            plan = extract_plan(text, target_fqn=ctx.state.target_fqn)
        except PlanParseError as exc:
            last_error = f"\n\nThe previous response was unusable: {exc.detail}"
            continue
        return _validate_plan(ctx, plan)
    ctx.state.reason = "plan unparseable after re-prompts"
    return None


def _validate_plan(
    ctx: SessionContext, plan: RefactoringPlan
) -> Optional[RefactoringPlan]:
    """Drop entries that do not resolve against the target's parse."""
    decl = ctx.model.type_of(ctx.state.target_fqn)
    simple = decl.simple_name
    kept = []
    for entry in plan.entries:
        if entry.region_kind == "class":
            if entry.identifier in (simple, ctx.state.target_fqn):
                kept.append(entry)
            else:
                # edits to other classes are journaled as advisory, not applied
                ctx.state.advisory_entries.append(entry)
        elif entry.region_kind == "method":
            names = {m.name for m in decl.methods} | {m.signature for m in decl.methods}
            if entry.identifier in names:
                kept.append(entry)
            else:
                ctx.state.warnings.append(
                    f"dropped plan entry for unknown method {entry.identifier!r}"
                )
        elif entry.region_kind == "field":
            if any(f.name == entry.identifier for f in decl.fields):
                kept.append(entry)
            else:
                ctx.state.warnings.append(
                    f"dropped plan entry for unknown field {entry.identifier!r}"
                )
        else:  # variable: locals are not modeled, keep verbatim
            kept.append(entry)
    if not kept:
        ctx.state.reason = "empty plan after validation"
        return None
    return RefactoringPlan(target_fqn=plan.target_fqn, entries=kept)


# -- candidate generation -------------------------------------------------


def generate_candidate(
    ctx: SessionContext, context_kind: str, error_summary: str = "", detail: str = ""
) -> Optional[str]:
    """One generator call; None when no code block could be extracted."""
    prompt = build_generator_prompt(
        ctx.state.plan, ctx.bundle, context_kind, error_summary, detail
    )
    text = ctx.chat("generator", context_kind, prompt, GENERATOR_SYSTEM)
    try:
        return extract_code_block(text)
    except NoCodeBlock:
        ctx.state.attempts.append(
            AttemptRecord(
                kind=context_kind,
                candidate_source="",
                verdict="no_code_block",
                error_summary="response had no fenced code block",
            )
        )
        return None


# -- feedback loops --------------------------------------------------------


def compile_loop(ctx: SessionContext) -> str:
    """Compile-and-fix until success or the compile budget is spent."""
    state = ctx.state
    cfg = ctx.config
    while state.compile_attempts < cfg.max_compile_iters:
        state.compile_attempts += 1
        outcome = compile_project(
            ctx.workspace, ctx.adapter, timeout=cfg.subprocess_timeout
        )
        candidate = ctx.target_path.read_text(encoding="utf-8")
        if outcome.status == "success":
            return "fixed"
        summary = summarize_errors(outcome.errors)
        state.attempts.append(
            AttemptRecord(
                kind="compile_fix" if state.attempts else "initial",
                candidate_source=candidate,
                verdict="compile_fail",
                error_summary=summary,
            )
        )
        if state.compile_attempts >= cfg.max_compile_iters:
            break
        fixed = generate_candidate(ctx, "compile_fix", summary)
        if fixed is not None:
            ctx.install_candidate(fixed)
    return "exhausted"


def test_loop(ctx: SessionContext) -> str:
    """Test-and-fix until green or the test budget is spent."""
    state = ctx.state
    cfg = ctx.config
    test_set = related_tests(ctx.graph, state.target_fqn, ctx.test_fqns)
    test_set |= ctx.generated_test_fqns
    test_filter = test_set or None
    while state.test_attempts < cfg.max_test_iters:
        state.test_attempts += 1
        outcome = run_tests(
            ctx.workspace, ctx.adapter, test_filter, timeout=cfg.subprocess_timeout
        )
        candidate = ctx.target_path.read_text(encoding="utf-8")
        if outcome.failed == 0:
            state.attempts.append(
                AttemptRecord(
                    kind="test_fix" if state.test_attempts > 1 else "initial",
                    candidate_source=candidate,
                    verdict="pass",
                )
            )
            return "passed"
        summary = summarize_failures(outcome.failures)
        state.attempts.append(
            AttemptRecord(
                kind="test_fix",
                candidate_source=candidate,
                verdict="test_fail",
                error_summary=summary,
            )
        )
        if state.test_attempts >= cfg.max_test_iters:
            break
        fixed = generate_candidate(ctx, "test_fix", summary)
        if fixed is not None:
            ctx.install_candidate(fixed)
            # recompiles triggered by a test fix consume the compile budget
            if compile_loop(ctx) == "exhausted":
                return "exhausted"
    return "exhausted"


# -- per-class session ------------------------------------------------------


def _class_snapshot_stats(ctx: SessionContext) -> dict:
    fqn = ctx.state.target_fqn
    model, test_fqns = load_project(
        ctx.workspace, ctx.config.source_roots, ctx.config.test_roots
    )
    graph = extract_dependencies(model)
    if fqn not in model.types:
        return {"metrics": None, "smells": []}
    metrics = compute_class_metrics(model, graph, fqn)
    smells = [
        s.to_json_dict()
        for s in detect_smells(model, graph, ctx.config.thresholds)
        if s.fqn == fqn
    ]
    return {"metrics": metrics.as_dict(), "smells": smells}


def _finish(ctx: SessionContext, phase: str, reason: str = "") -> SessionVerdict:
    state = ctx.state
    state.phase = phase
    verdict = SessionVerdict(
        target_fqn=state.target_fqn,
        phase=phase,
        compile_attempts=state.compile_attempts,
        test_attempts=state.test_attempts,
        reason=reason or state.reason,
    )
    journal = ctx.journal
    fqn = state.target_fqn
    if state.plan is not None:
        payload = state.plan.to_json_dict()
        payload["advisory"] = [e.to_json_dict() for e in state.advisory_entries]
        payload["warnings"] = state.warnings
        journal.write_json(fqn, "plan.json", payload)
    for i, attempt in enumerate(state.attempts, start=1):
        journal.write_json(fqn, f"attempt_{i}.json", attempt.to_json_dict())
    journal.write_json(fqn, "verdict.json", verdict.to_json_dict())
    journal.write_json(fqn, "transcript.json", state.transcript.to_json_dict())
    return verdict


def run_class_session(
    workspace: Path | str,
    fqn: str,
    config: EngineConfig,
    backend=None,
    adapter=None,
    journal: Optional[Journal] = None,
    dry_run: bool = False,
) -> SessionVerdict:
    workspace = Path(workspace)
    backend = backend if backend is not None else make_backend(config.backend)
    adapter = adapter if adapter is not None else _default_adapter(config)
    journal = journal or Journal(workspace / config.journal_dir)

    model, test_fqns = load_project(workspace, config.source_roots, config.test_roots)
    graph = extract_dependencies(model)
    state = SessionState(target_fqn=fqn)
    ctx = SessionContext(
        workspace=workspace,
        config=config,
        backend=backend,
        adapter=adapter,
        journal=journal,
        model=model,
        graph=graph,
        test_fqns=test_fqns,
        state=state,
    )

    snapshot = Snapshot.take(workspace)
    state.snapshot = snapshot
    before_stats = _class_snapshot_stats(ctx)
    journal.write_json(fqn, "metrics_before.json", before_stats)

    try:
        return _run_session_body(ctx, dry_run)
    except ToolError as exc:
        snapshot.restore()
        state.reason = f"tool failure: {exc}"
        return _finish(ctx, "REVERTED")
    except PlaybookExhausted as exc:
        snapshot.restore()
        state.reason = f"playbook exhausted: {exc}"
        return _finish(ctx, "REVERTED")


def _run_session_body(ctx: SessionContext, dry_run: bool) -> SessionVerdict:
    state = ctx.state
    cfg = ctx.config
    snapshot = state.snapshot

    # test generation runs against the original, pre-refactoring code
    if cfg.generated_tests_dir and not dry_run:
        generator = StubTestGenerator(Path(cfg.generated_tests_dir))
        created = generate_tests(
            generator, state.target_fqn, ctx.workspace, cfg.test_roots[0]
        )
        for path in created:
            unit = parse_source(path.read_text(encoding="utf-8"), str(path))
            ctx.generated_test_fqns.update(t.fqn for t in unit.types)

    try:
        ctx.bundle = collect_bundle(
            ctx.model, ctx.graph, state.target_fqn, cfg.token_budget
        )
    except TargetOverBudget as exc:
        snapshot.restore()
        state.reason = str(exc)
        return _finish(ctx, "SKIPPED")

    state.phase = "PLANNING"
    plan = plan_refactoring(ctx)
    if plan is None:
        snapshot.restore()
        return _finish(ctx, "SKIPPED")
    state.plan = plan

    if dry_run:
        snapshot.restore()
        return _finish(ctx, "SKIPPED", reason="dry run: plan journaled only")

    state.phase = "GENERATING"
    candidate = None
    while candidate is None and state.compile_attempts < cfg.max_compile_iters:
        candidate = generate_candidate(ctx, "initial")
        if candidate is None:
            state.compile_attempts += 1
    if candidate is None:
        snapshot.restore()
        state.reason = "no usable initial candidate"
        return _finish(ctx, "REVERTED")
    ctx.install_candidate(candidate)

    state.phase = "COMPILING"
    if compile_loop(ctx) == "exhausted":
        snapshot.restore()
        state.reason = "compile budget exhausted"
        return _finish(ctx, "REVERTED")

    state.phase = "TESTING"
    if test_loop(ctx) == "exhausted":
        snapshot.restore()
        state.reason = "test budget exhausted"
        return _finish(ctx, "REVERTED")

    after_stats = _class_snapshot_stats(ctx)
    ctx.journal.write_json(state.target_fqn, "metrics_after.json", after_stats)
    rel = ctx.target_path.relative_to(ctx.workspace)
    before_text = snapshot.contents.get(str(rel), b"").decode("utf-8")
    after_text = ctx.target_path.read_text(encoding="utf-8")
    diff = "".join(
        difflib.unified_diff(
            before_text.splitlines(keepends=True),
            after_text.splitlines(keepends=True),
            fromfile=f"a/{rel}",
            tofile=f"b/{rel}",
        )
    )
    ctx.journal.write_text(state.target_fqn, "diff.patch", diff)
    if cfg.commit_command:
        argv = [
            part.replace("{fqn}", state.target_fqn) for part in cfg.commit_command
        ]
        subprocess.run(argv, cwd=ctx.workspace, check=False, capture_output=True)
    return _finish(ctx, "COMMITTED")


def _default_adapter(config: EngineConfig):
    from .toolchain import SubsetAdapter

    return SubsetAdapter(
        source_roots=list(config.source_roots),
        test_roots=list(config.test_roots),
    )


# -- project loop -------------------------------------------------------------


@dataclass
class ProjectReport:
    verdicts: list[SessionVerdict]
    class_order: list[str]
    smells_before: int
    smells_after: int
    seed: int

    @property
    def verdict_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for v in self.verdicts:
            counts[v.phase] = counts.get(v.phase, 0) + 1
        return counts


def run_project(
    workspace: Path | str,
    config: EngineConfig,
    backend=None,
    adapter=None,
    dry_run: bool = False,
    target: Optional[str] = None,
) -> ProjectReport:
    workspace = Path(workspace)
    backend = backend if backend is not None else make_backend(config.backend)
    adapter = adapter if adapter is not None else _default_adapter(config)
    journal = Journal(workspace / config.journal_dir)

    baseline = compile_project(workspace, adapter, timeout=config.subprocess_timeout)
    if baseline.status != "success":
        raise BaselineFailure("baseline compile failed:\n" + baseline.raw_log[:2000])
    baseline_tests = run_tests(workspace, adapter, timeout=config.subprocess_timeout)
    if baseline_tests.failed > 0:
        raise BaselineFailure(
            f"baseline tests failing: {baseline_tests.failed} of {baseline_tests.total}"
        )

    model, test_fqns = load_project(workspace, config.source_roots, config.test_roots)
    graph = extract_dependencies(model)
    smell_list_before = detect_smells(model, graph, config.thresholds)
    smells_before = len(smell_list_before)
    qmood_before = qmood_attributes(
        aggregate_design_vector(model, graph), config.coefficient_table
    )

    classes = sorted(fqn for fqn in model.types if fqn not in test_fqns)
    if target is not None:
        classes = [c for c in classes if c == target]
    rng = random.Random(config.seed)
    rng.shuffle(classes)

    verdicts = []
    for fqn in classes:
        logger.info("session start: %s", fqn)
        verdicts.append(
            run_class_session(
                workspace, fqn, config,
                backend=backend, adapter=adapter, journal=journal, dry_run=dry_run,
            )
        )

    model_after, _ = load_project(workspace, config.source_roots, config.test_roots)
    graph_after = extract_dependencies(model_after)
    smell_list_after = detect_smells(model_after, graph_after, config.thresholds)
    smells_after = len(smell_list_after)
    qmood_after = qmood_attributes(
        aggregate_design_vector(model_after, graph_after), config.coefficient_table
    )

    def _kind_counts(smells):
        counts: dict[str, int] = {}
        for s in smells:
            counts[s.kind] = counts.get(s.kind, 0) + 1
        return counts

    report = ProjectReport(
        verdicts=verdicts,
        class_order=classes,
        smells_before=smells_before,
        smells_after=smells_after,
        seed=config.seed,
    )
    journal.write_manifest(
        {
            "seed": config.seed,
            "config": {
                "backend_kind": config.backend.kind,
                "token_budget": config.token_budget,
                "max_compile_iters": config.max_compile_iters,
                "max_test_iters": config.max_test_iters,
                "source_roots": config.source_roots,
                "test_roots": config.test_roots,
            },
            "class_order": classes,
            "verdicts": [v.to_json_dict() for v in verdicts],
            "verdict_counts": report.verdict_counts,
            "smells_before": smells_before,
            "smells_after": smells_after,
            "smell_kind_counts_before": _kind_counts(smell_list_before),
            "smell_kind_counts_after": _kind_counts(smell_list_after),
            "qmood_before": qmood_before.values,
            "qmood_after": qmood_after.values,
            "ablation": {
                "context": config.ablation.context,
                "depgraph": config.ablation.depgraph,
                "codesearch": config.ablation.codesearch,
            },
        }
    )
    return report
