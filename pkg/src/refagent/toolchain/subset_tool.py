"""Offline compiler and test runner for the supported Java subset.

`compile` parses every source file and reports javac-style diagnostics;
`test` evaluates directive-based assertions found in test method bodies
against the model built from the main sources:

    // expect-type: p.Account
    // expect-method: p.Account#deposit(int)
    // expect-field: p.Account#balance

A test method passes when all of its directives hold. Output mirrors the
build-tool conventions the log parsers expect: `[ERROR] path:[l,c] msg`
lines and a `Tests run: N, Failures: F, Errors: E, Skipped: S` summary.

Exit codes: 0 success, 1 compile errors or test failures, 2 usage error,
4 tool failure (e.g. tests requested but sources do not parse).
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from ..errors import DuplicateType, ParseError
from ..source_model import (
    DesignModel,
    SourceUnit,
    build_design_model,
    discover_sources,
    parse_source,
)

DIRECTIVE_RE = re.compile(
    r"//\s*expect-(type|method|field):\s*(\S+)"
)


def _parse_tree(
    workspace: Path, roots: list[str]
) -> tuple[list[SourceUnit], list[str]]:
    units: list[SourceUnit] = []
    errors: list[str] = []
    for path in discover_sources(workspace, roots):
        rel = path.relative_to(workspace)
        try:
            units.append(parse_source(path.read_text(encoding="utf-8"), str(rel)))
        except ParseError as exc:
            errors.append(f"[ERROR] {rel}:[{exc.line},1] {exc.message}")
    return units, errors


def cmd_compile(workspace: Path, source_roots: list[str], test_roots: list[str]) -> int:
    units, errors = _parse_tree(workspace, source_roots + test_roots)
    if not errors:
        try:
            build_design_model(units)
        except DuplicateType as exc:
            errors.append(f"[ERROR] .:[1,1] {exc}")
        except ParseError as exc:
            errors.append(f"[ERROR] .:[{max(exc.line, 1)},1] {exc.message}")
    for line in errors:
        print(line)
    if errors:
        print("BUILD FAILURE")
        return 1
    print("BUILD SUCCESS")
    return 0


def _check_directive(model: DesignModel, kind: str, spec: str) -> str | None:
    """Returns a failure message, or None when the expectation holds."""
    if kind == "type":
        if spec not in model.types:
            return f"missing type {spec}"
        return None
    if "#" not in spec:
        return f"malformed directive target {spec!r}"
    fqn, member = spec.split("#", 1)
    if fqn not in model.types:
        return f"missing type {fqn}"
    decl = model.types[fqn]
    if kind == "method":
        if decl.method_by_signature(member) is None:
            return f"missing method {spec}"
        return None
    if any(f.name == member for f in decl.fields):
        return None
    return f"missing field {spec}"


def cmd_test(
    workspace: Path,
    source_roots: list[str],
    test_roots: list[str],
    test_filter: set[str] | None,
) -> int:
    main_units, errors = _parse_tree(workspace, source_roots)
    test_units, test_errors = _parse_tree(workspace, test_roots)
    errors += test_errors
    if errors:
        for line in errors:
            print(line)
        print("cannot run tests: sources do not compile")
        return 4
    try:
        model = build_design_model(main_units + test_units)
    except (DuplicateType, ParseError) as exc:
        print(f"cannot run tests: {exc}")
        return 4

    total = failures = 0
    failure_lines: list[str] = []
    for unit in test_units:
        source_lines = unit.raw_text.splitlines()
        for decl in unit.types:
            if test_filter is not None and not (
                decl.fqn in test_filter or decl.simple_name in test_filter
            ):
                continue
            print(f"Running {decl.fqn}")
            for method in decl.methods:
                if method.is_constructor:
                    continue
                total += 1
                start, end = method.line_range
                body = "\n".join(source_lines[start - 1 : end])
                problem = None
                for kind, spec in DIRECTIVE_RE.findall(body):
                    problem = _check_directive(model, kind, spec)
                    if problem is not None:
                        break
                if problem is None:
                    print(f"  {method.name} PASS")
                else:
                    failures += 1
                    failure_lines.append(f"FAILED {decl.fqn}#{method.name}: {problem}")
                    print(f"  {method.name} FAIL")
    for line in failure_lines:
        print(line)
    print(f"Tests run: {total}, Failures: {failures}, Errors: 0, Skipped: 0")
    return 0 if failures == 0 else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="subset_tool")
    parser.add_argument("command", choices=["compile", "test"])
    parser.add_argument("workspace", type=Path)
    parser.add_argument("--source-root", action="append", default=None)
    parser.add_argument("--test-root", action="append", default=None)
    parser.add_argument("--test", default=None, help="comma-separated test classes")
    args = parser.parse_args(argv)

    source_roots = args.source_root or ["src/main/java"]
    test_roots = args.test_root or ["src/test/java"]
    if args.command == "compile":
        return cmd_compile(args.workspace, source_roots, test_roots)
    test_filter = set(args.test.split(",")) if args.test else None
    return cmd_test(args.workspace, source_roots, test_roots, test_filter)


if __name__ == "__main__":
    sys.exit(main())
