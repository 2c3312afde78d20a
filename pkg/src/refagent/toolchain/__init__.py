"""Build, test, and test-generation adapters with structured diagnostics.

The reference adapter targets Maven conventions. A subset adapter shells
out to this package's own compiler/test-runner (`python -m
refagent.toolchain.subset_tool`) so the whole pipeline runs offline with
real subprocess calls. Both emit javac-style `path:[line,col] message`
records parsed here.
"""

from __future__ import annotations

import logging
import re
import shutil
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

from ..errors import GeneratorUnavailable, ToolError
from ..source_model import parse_source

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 600.0
GENERATED_PACKAGE_SUFFIX = "refagent_generated"


@dataclass
class Diagnostic:
    file: str
    line: int
    severity: str  # error | warning
    message: str


@dataclass
class BuildOutcome:
    status: str  # success | failure | tool_error
    diagnostics: list[Diagnostic]
    raw_log: str
    duration: float

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]


@dataclass
class TestFailure:
    test_id: str
    message: str
    trace_excerpt: str = ""


@dataclass
class TestOutcome:
    total: int
    passed: int
    failed: int
    skipped: int
    failures: list[TestFailure]
    raw_log: str


_DIAG_RE = re.compile(
    r"^\[(ERROR|WARNING)\]\s+(.+?):\[(\d+),(\d+)\]\s+(.*)$"
)
_SUMMARY_RE = re.compile(
    r"Tests run:\s*(\d+),\s*Failures:\s*(\d+),\s*Errors:\s*(\d+),\s*Skipped:\s*(\d+)"
)
_FAILED_RE = re.compile(r"^FAILED\s+(\S+):\s*(.*)$")


def parse_compiler_log(raw: str) -> list[Diagnostic]:
    """Extract javac-style diagnostics; unknown lines are ignored."""
    diagnostics: list[Diagnostic] = []
    for line in raw.splitlines():
        match = _DIAG_RE.match(line.strip())
        if match is None:
            continue
        severity, path, lineno, _col, message = match.groups()
        diagnostics.append(
            Diagnostic(
                file=path,
                line=int(lineno),
                severity=severity.lower(),
                message=message.strip(),
            )
        )
    return diagnostics


def parse_test_log(raw: str) -> Optional[TestOutcome]:
    """Parse the aggregate summary and FAILED lines; None if no summary."""
    summary = None
    for match in _SUMMARY_RE.finditer(raw):
        summary = match
    if summary is None:
        return None
    total, failures, errors, skipped = (int(g) for g in summary.groups())
    failed = failures + errors
    failure_records = [
        TestFailure(test_id=m.group(1), message=m.group(2))
        for line in raw.splitlines()
        if (m := _FAILED_RE.match(line.strip())) is not None
    ]
    return TestOutcome(
        total=total,
        passed=total - failed - skipped,
        failed=failed,
        skipped=skipped,
        failures=failure_records,
        raw_log=raw,
    )


class BuildAdapter(Protocol):
    name: str

    def applicable(self, workspace: Path) -> bool: ...

    def compile_argv(self, workspace: Path) -> list[str]: ...

    def test_argv(self, workspace: Path, test_filter: Optional[set[str]]) -> list[str]: ...


@dataclass
class MavenAdapter:
    name: str = "maven"

    def applicable(self, workspace: Path) -> bool:
        return (workspace / "pom.xml").is_file()

    def compile_argv(self, workspace: Path) -> list[str]:
        return ["mvn", "-q", "-B", "compile", "-DskipTests"]

    def test_argv(self, workspace: Path, test_filter: Optional[set[str]]) -> list[str]:
        argv = ["mvn", "-q", "-B", "test"]
        if test_filter:
            argv.append("-Dtest=" + ",".join(sorted(test_filter)))
        return argv


@dataclass
class SubsetAdapter:
    """Offline adapter backed by the bundled subset compiler/test runner."""

    source_roots: list[str] = field(default_factory=lambda: ["src/main/java"])
    test_roots: list[str] = field(default_factory=lambda: ["src/test/java"])
    name: str = "subset"

    def applicable(self, workspace: Path) -> bool:
        return any((workspace / root).is_dir() for root in self.source_roots)

    def _roots_argv(self) -> list[str]:
        argv: list[str] = []
        for root in self.source_roots:
            argv += ["--source-root", root]
        for root in self.test_roots:
            argv += ["--test-root", root]
        return argv

    def compile_argv(self, workspace: Path) -> list[str]:
        return [
            sys.executable, "-m", "refagent.toolchain.subset_tool",
            "compile", str(workspace), *self._roots_argv(),
        ]

    def test_argv(self, workspace: Path, test_filter: Optional[set[str]]) -> list[str]:
        argv = [
            sys.executable, "-m", "refagent.toolchain.subset_tool",
            "test", str(workspace), *self._roots_argv(),
        ]
        if test_filter:
            argv += ["--test", ",".join(sorted(test_filter))]
        return argv


def _run(argv: list[str], workspace: Path, timeout: float) -> tuple[int, str]:
    try:
        proc = subprocess.run(
            argv,
            cwd=workspace,
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except FileNotFoundError as exc:
        raise ToolError(f"build tool not found: {argv[0]}") from exc
    except subprocess.TimeoutExpired as exc:
        raise ToolError(f"timed out after {timeout}s: {' '.join(argv)}") from exc
    return proc.returncode, proc.stdout + proc.stderr


def compile_project(
    workspace: Path | str,
    adapter: BuildAdapter,
    timeout: float = DEFAULT_TIMEOUT,
) -> BuildOutcome:
    """Compile via the adapter's subprocess; diagnostics from its log."""
    workspace = Path(workspace)
    if not adapter.applicable(workspace):
        raise ToolError(f"{adapter.name}: no recognized build descriptor in {workspace}")
    started = time.monotonic()
    code, log = _run(adapter.compile_argv(workspace), workspace, timeout)
    duration = time.monotonic() - started
    diagnostics = parse_compiler_log(log)
    if code == 0:
        return BuildOutcome("success", diagnostics, log, duration)
    if any(d.severity == "error" for d in diagnostics):
        return BuildOutcome("failure", diagnostics, log, duration)
    raise ToolError(f"{adapter.name} exited {code} with no parseable diagnostics:\n{log[:2000]}")


def run_tests(
    workspace: Path | str,
    adapter: BuildAdapter,
    test_filter: Optional[set[str]] = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> TestOutcome:
    workspace = Path(workspace)
    if not adapter.applicable(workspace):
        raise ToolError(f"{adapter.name}: no recognized build descriptor in {workspace}")
    code, log = _run(adapter.test_argv(workspace, test_filter), workspace, timeout)
    outcome = parse_test_log(log)
    if outcome is None:
        raise ToolError(f"{adapter.name} exited {code} with no test summary:\n{log[:2000]}")
    return outcome


class TestGeneratorAdapter(Protocol):
    def generate(self, fqn: str, workspace: Path, test_root: str) -> list[Path]: ...


@dataclass
class StubTestGenerator:
    """Installs pre-baked fixture tests, keyed by target FQN filename."""

    fixture_dir: Path

    def generate(self, fqn: str, workspace: Path, test_root: str) -> list[Path]:
        source = Path(self.fixture_dir) / f"{fqn}.java"
        if not source.is_file():
            return []
        unit = parse_source(source.read_text(encoding="utf-8"), str(source))
        if not unit.types:
            return []
        package_dir = Path(test_root, *unit.package.split("."))
        destination = workspace / package_dir / f"{unit.types[0].simple_name}.java"
        destination.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(source, destination)
        return [destination]


@dataclass
class ExternalTestGenerator:
    """Shells out to an external generator command for the target class."""

    command: list[str]  # '{fqn}' and '{workspace}' placeholders substituted

    def generate(self, fqn: str, workspace: Path, test_root: str) -> list[Path]:
        argv = [
            part.replace("{fqn}", fqn).replace("{workspace}", str(workspace))
            for part in self.command
        ]
        root = workspace / test_root
        before = set(root.rglob("*.java")) if root.is_dir() else set()
        try:
            proc = subprocess.run(
                argv, cwd=workspace, capture_output=True, text=True,
                timeout=DEFAULT_TIMEOUT,
            )
        except FileNotFoundError as exc:
            raise GeneratorUnavailable(f"generator not found: {argv[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise ToolError(f"test generator timed out: {' '.join(argv)}") from exc
        if proc.returncode != 0:
            raise ToolError(
                f"test generator exited {proc.returncode}: {proc.stderr[:2000]}"
            )
        after = set(root.rglob("*.java")) if root.is_dir() else set()
        return sorted(after - before)


def generate_tests(
    adapter: TestGeneratorAdapter,
    fqn: str,
    workspace: Path | str,
    test_root: str = "src/test/java",
) -> list[Path]:
    """Run the generator against the pre-refactoring snapshot of the class."""
    return adapter.generate(fqn, Path(workspace), test_root)
