import json
import shutil

import pytest

from conftest import PLAYBOOKS, TRIPLE
from refagent.config import build_config
from refagent.errors import BaselineFailure
from refagent.gateway import make_backend
from refagent.orchestrator import (
    Snapshot,
    run_class_session,
    run_project,
    summarize_errors,
    summarize_failures,
    tree_digest,
)
from refagent.toolchain import Diagnostic
from refagent.toolchain import TestFailure as FailureRecord

HAPPY = str(PLAYBOOKS / "triple_happy.json")
BROKEN_COMPILE = str(PLAYBOOKS / "broken_compile.json")
BROKEN_TEST = str(PLAYBOOKS / "broken_test.json")


def scripted_config(workspace, playbook, **extra):
    overrides = {"backend": {"kind": "scripted", "playbook_path": playbook}}
    overrides.update(extra)
    return build_config(workspace, overrides)


class TestSnapshot:
    def test_restore_reverts_edits_and_added_files(self, triple_workspace):
        snapshot = Snapshot.take(triple_workspace)
        target = triple_workspace / "src/main/java/p/Alpha.java"
        target.write_text("garbage", encoding="utf-8")
        (triple_workspace / "src/main/java/p/New.java").write_text("package p;")
        snapshot.restore()
        assert "class Alpha" in target.read_text()
        assert not (triple_workspace / "src/main/java/p/New.java").exists()
        assert tree_digest(triple_workspace) == snapshot.digest

    def test_journal_dir_excluded_from_digest(self, triple_workspace):
        before = tree_digest(triple_workspace)
        marker = triple_workspace / ".refagent" / "journal" / "x.json"
        marker.parent.mkdir(parents=True)
        marker.write_text("{}")
        assert tree_digest(triple_workspace) == before


class TestSummaries:
    def test_grouped_sorted_deduplicated(self):
        diagnostics = [
            Diagnostic("B.java", 9, "error", "missing ;"),
            Diagnostic("A.java", 5, "error", "cannot find symbol"),
            Diagnostic("A.java", 2, "error", "bad type"),
            Diagnostic("A.java", 5, "error", "cannot find symbol"),
        ]
        summary = summarize_errors(diagnostics)
        assert summary.index("A.java") < summary.index("B.java")
        assert "line 2: bad type" in summary
        assert "cannot find symbol (x2)" in summary

    def test_token_budget_truncates(self):
        diagnostics = [
            Diagnostic("A.java", i, "error", "x" * 40) for i in range(200)
        ]
        summary = summarize_errors(diagnostics, token_budget=50)
        assert "[truncated]" in summary
        assert len(summary) < 400

    def test_llm_summary_appended_not_replacing(self):
        class FakeBackend:
            def complete(self, request):
                return type("R", (), {"text": "model view"})()

        diagnostics = [Diagnostic("A.java", 1, "error", "broken")]
        summary = summarize_errors(diagnostics, backend=FakeBackend())
        assert "line 1: broken" in summary and summary.endswith("model view")

    def test_failure_summary(self):
        failures = [FailureRecord("p.T#a", "missing method")]
        assert summarize_failures(failures) == "p.T#a: missing method"


class TestSessions:
    def test_committed_session_journal_layout(self, triple_workspace):
        config = scripted_config(triple_workspace, HAPPY)
        verdict = run_class_session(triple_workspace, "p.Alpha", config)
        assert verdict.phase == "COMMITTED"
        assert verdict.compile_attempts == 1 and verdict.test_attempts == 1
        class_dir = triple_workspace / ".refagent/journal/p.Alpha"
        for name in (
            "plan.json", "attempt_1.json", "diff.patch", "verdict.json",
            "metrics_before.json", "metrics_after.json", "transcript.json",
            "planner_prompt.txt",
        ):
            assert (class_dir / name).is_file(), name
        assert "count += 1" in (
            triple_workspace / "src/main/java/p/Alpha.java"
        ).read_text()
        diff = (class_dir / "diff.patch").read_text()
        assert diff.startswith("--- a/") and "+        count += 1;" in diff

    def test_compile_error_fixed_at_attempt_two(self, triple_workspace):
        config = scripted_config(triple_workspace, HAPPY)
        backend = make_backend(config.backend)  # shared across sessions
        run_class_session(triple_workspace, "p.Alpha", config, backend=backend)
        run_class_session(triple_workspace, "p.Gamma", config, backend=backend)
        verdict = run_class_session(triple_workspace, "p.Beta", config, backend=backend)
        assert verdict.phase == "COMMITTED"
        assert verdict.compile_attempts == 2
        attempt = json.loads(
            (triple_workspace / ".refagent/journal/p.Beta/attempt_1.json").read_text()
        )
        assert attempt["verdict"] == "compile_fail"
        assert attempt["error_summary"]

    def test_compile_cap_reverts(self, triple_workspace):
        config = scripted_config(triple_workspace, BROKEN_COMPILE)
        before = tree_digest(triple_workspace)
        verdict = run_class_session(triple_workspace, "p.Gamma", config)
        assert verdict.phase == "REVERTED"
        assert verdict.compile_attempts == 20
        assert tree_digest(triple_workspace) == before

    def test_test_cap_reverts(self, triple_workspace):
        config = scripted_config(triple_workspace, BROKEN_TEST)
        before = tree_digest(triple_workspace)
        verdict = run_class_session(triple_workspace, "p.Gamma", config)
        assert verdict.phase == "REVERTED"
        assert verdict.test_attempts == 20
        assert verdict.compile_attempts == 20  # test fixes consume compile budget
        assert tree_digest(triple_workspace) == before

    def test_plan_validation_drops_and_advises(self, triple_workspace, tmp_path):
        plan = [
            {"region_kind": "method", "identifier": "increment",
             "line_range": [10, 12], "refactoring_type": "Inline", "instruction": "a"},
            {"region_kind": "method", "identifier": "nosuch",
             "line_range": [1, 2], "refactoring_type": "Inline", "instruction": "b"},
            {"region_kind": "class", "identifier": "Other",
             "line_range": [1, 2], "refactoring_type": "Move", "instruction": "c"},
        ]
        fixed = (TRIPLE / "src/main/java/p/Alpha.java").read_text()
        playbook = tmp_path / "pb.json"
        playbook.write_text(json.dumps({"entries": [
            {"agent": "planner", "phase": "initial",
             "response": "```json\n" + json.dumps(plan) + "\n```"},
            {"agent": "generator", "phase": "initial",
             "response": "```java\n" + fixed + "```"},
        ]}))
        config = scripted_config(triple_workspace, str(playbook))
        verdict = run_class_session(triple_workspace, "p.Alpha", config)
        assert verdict.phase == "COMMITTED"
        journaled = json.loads(
            (triple_workspace / ".refagent/journal/p.Alpha/plan.json").read_text()
        )
        assert [e["identifier"] for e in journaled["entries"]] == ["increment"]
        assert any("nosuch" in w for w in journaled["warnings"])
        assert [e["identifier"] for e in journaled["advisory"]] == ["Other"]

    def test_target_over_budget_skips(self, tmp_path):
        ws = tmp_path / "big"
        src = ws / "src/main/java/b"
        src.mkdir(parents=True)
        methods = "\n".join(
            f"    public void method{i}() {{ int v{i} = 0; }}" for i in range(60)
        )
        (src / "Big.java").write_text(
            f"package b;\n\npublic class Big {{\n{methods}\n}}\n"
        )
        config = build_config(ws, {
            "backend": {"kind": "scripted", "playbook_path": HAPPY},
            "token_budget": 256,
        })
        before = tree_digest(ws)
        verdict = run_class_session(ws, "b.Big", config)
        assert verdict.phase == "SKIPPED"
        assert "exceeds budget" in verdict.reason
        assert tree_digest(ws) == before

    def test_dry_run_never_mutates(self, triple_workspace):
        config = scripted_config(triple_workspace, HAPPY)
        before = tree_digest(triple_workspace)
        verdict = run_class_session(triple_workspace, "p.Alpha", config, dry_run=True)
        assert verdict.phase == "SKIPPED"
        assert tree_digest(triple_workspace) == before
        assert (triple_workspace / ".refagent/journal/p.Alpha/plan.json").is_file()

    def test_commit_hook_runs(self, triple_workspace):
        config = scripted_config(
            triple_workspace, HAPPY, commit_command=["touch", "hook_{fqn}"]
        )
        run_class_session(triple_workspace, "p.Alpha", config)
        assert (triple_workspace / "hook_p.Alpha").exists()


def _normalized_journal(journal_dir):
    files = {}
    for path in sorted(journal_dir.rglob("*")):
        if not path.is_file():
            continue
        rel = str(path.relative_to(journal_dir))
        if path.suffix == ".json":
            data = json.loads(path.read_text())
            _strip_timestamps(data)
            files[rel] = json.dumps(data, sort_keys=True)
        else:
            files[rel] = path.read_text()
    return files


def _strip_timestamps(node):
    if isinstance(node, dict):
        node.pop("timestamp", None)
        for value in node.values():
            _strip_timestamps(value)
    elif isinstance(node, list):
        for value in node:
            _strip_timestamps(value)


class TestProject:
    def test_run_project_verdicts_and_manifest(self, triple_workspace):
        config = scripted_config(triple_workspace, HAPPY)
        report = run_project(triple_workspace, config)
        assert report.verdict_counts == {"COMMITTED": 2, "REVERTED": 1}
        assert report.class_order == ["p.Alpha", "p.Gamma", "p.Beta"]
        manifest = json.loads(
            (triple_workspace / ".refagent/journal/manifest.json").read_text()
        )
        assert manifest["seed"] == 0
        assert manifest["verdict_counts"] == report.verdict_counts
        assert manifest["config"]["max_compile_iters"] == 20
        assert set(manifest["qmood_before"]) == set(manifest["qmood_after"])
        caps_ok = all(
            v["compile_attempts"] <= 20 and v["test_attempts"] <= 20
            for v in manifest["verdicts"]
        )
        assert caps_ok

    def test_same_seed_same_journal(self, tmp_path):
        journals = []
        for run in ("one", "two"):
            ws = tmp_path / run
            shutil.copytree(TRIPLE, ws)
            config = scripted_config(ws, HAPPY)
            run_project(ws, config)
            journals.append(_normalized_journal(ws / ".refagent/journal"))
        assert journals[0] == journals[1]

    def test_seed_changes_order(self, triple_workspace):
        config = scripted_config(triple_workspace, HAPPY, seed=2)
        # only check the permutation; the playbook order no longer matches,
        # so run in dry-run mode where only planning happens
        report = run_project(triple_workspace, config, dry_run=True)
        assert sorted(report.class_order) == ["p.Alpha", "p.Beta", "p.Gamma"]

    def test_baseline_compile_failure_aborts(self, triple_workspace):
        target = triple_workspace / "src/main/java/p/Beta.java"
        target.write_text(target.read_text().replace("}\n}", "}\n"), encoding="utf-8")
        config = scripted_config(triple_workspace, HAPPY)
        with pytest.raises(BaselineFailure):
            run_project(triple_workspace, config)

    def test_baseline_test_failure_aborts(self, triple_workspace):
        gamma = triple_workspace / "src/main/java/p/Gamma.java"
        gamma.write_text(gamma.read_text().replace("gamma", "delta"), encoding="utf-8")
        config = scripted_config(triple_workspace, HAPPY)
        with pytest.raises(BaselineFailure):
            run_project(triple_workspace, config)
