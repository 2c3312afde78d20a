import pytest

from conftest import FIXTURES
from refagent.errors import GeneratorUnavailable, ToolError
from refagent.orchestrator import tree_digest
from refagent.toolchain import (
    ExternalTestGenerator,
    MavenAdapter,
    StubTestGenerator,
    SubsetAdapter,
    compile_project,
    generate_tests,
    parse_compiler_log,
    parse_test_log,
    run_tests,
)


class TestLogParsing:
    def test_golden_maven_log(self):
        raw = (FIXTURES / "maven_golden.log").read_text()
        diagnostics = parse_compiler_log(raw)
        errors = [d for d in diagnostics if d.severity == "error"]
        warnings = [d for d in diagnostics if d.severity == "warning"]
        assert len(errors) == 2 and len(warnings) == 1
        assert errors[0].file == "src/main/java/com/shop/Cart.java"
        assert errors[0].line == 42
        assert errors[0].message == "cannot find symbol"
        assert errors[1].line == 88

    def test_download_noise_ignored(self):
        raw = (FIXTURES / "maven_golden.log").read_text()
        assert all(
            "Downloading" not in d.message for d in parse_compiler_log(raw)
        )

    def test_test_log_summary_and_failures(self):
        raw = (
            "Running p.AlphaTest\n"
            "FAILED p.AlphaTest#testApi: missing method p.Alpha#getCount()\n"
            "Tests run: 5, Failures: 1, Errors: 1, Skipped: 1\n"
        )
        outcome = parse_test_log(raw)
        assert outcome.total == 5
        assert outcome.failed == 2  # failures + errors
        assert outcome.passed == 2
        assert outcome.skipped == 1
        assert outcome.failures[0].test_id == "p.AlphaTest#testApi"

    def test_no_summary_returns_none(self):
        assert parse_test_log("nothing to see") is None


class TestSubsetAdapter:
    def test_compile_success(self, triple_workspace):
        outcome = compile_project(triple_workspace, SubsetAdapter())
        assert outcome.status == "success"
        assert outcome.errors == []

    def test_compile_failure_has_diagnostics(self, triple_workspace):
        target = triple_workspace / "src/main/java/p/Beta.java"
        target.write_text(target.read_text().replace("}\n}", "}\n"), encoding="utf-8")
        outcome = compile_project(triple_workspace, SubsetAdapter())
        assert outcome.status == "failure"
        assert outcome.errors and "Beta.java" in outcome.errors[0].file

    def test_tests_pass_and_filter(self, triple_workspace):
        outcome = run_tests(triple_workspace, SubsetAdapter())
        assert outcome.total == 3 and outcome.failed == 0
        filtered = run_tests(triple_workspace, SubsetAdapter(), {"p.AlphaTest"})
        assert filtered.total == 1

    def test_failing_directive_reported(self, triple_workspace):
        gamma = triple_workspace / "src/main/java/p/Gamma.java"
        gamma.write_text(gamma.read_text().replace("gamma", "delta"), encoding="utf-8")
        outcome = run_tests(triple_workspace, SubsetAdapter(), {"p.GammaTest"})
        assert outcome.failed == 1
        assert "p.Gamma#gamma()" in outcome.failures[0].message

    def test_compile_and_test_leave_tree_unchanged(self, triple_workspace):
        before = tree_digest(triple_workspace)
        compile_project(triple_workspace, SubsetAdapter())
        run_tests(triple_workspace, SubsetAdapter())
        assert tree_digest(triple_workspace) == before

    def test_not_applicable_raises_tool_error(self, tmp_path):
        with pytest.raises(ToolError):
            compile_project(tmp_path, SubsetAdapter())

    def test_maven_adapter_argv_shape(self, tmp_path):
        (tmp_path / "pom.xml").write_text("<project/>")
        adapter = MavenAdapter()
        assert adapter.applicable(tmp_path)
        assert adapter.compile_argv(tmp_path)[:2] == ["mvn", "-q"]
        argv = adapter.test_argv(tmp_path, {"BTest", "ATest"})
        assert argv[-1] == "-Dtest=ATest,BTest"


class TestTestGeneration:
    def test_stub_generator_installs_fixture(self, triple_workspace):
        generator = StubTestGenerator(FIXTURES / "generated_tests")
        created = generate_tests(generator, "p.Alpha", triple_workspace)
        assert len(created) == 1
        assert created[0].name == "AlphaGeneratedTest.java"
        assert "refagent_generated" in str(created[0])
        outcome = run_tests(
            triple_workspace, SubsetAdapter(),
            {"p.refagent_generated.AlphaGeneratedTest"},
        )
        assert outcome.total == 1 and outcome.failed == 0

    def test_stub_generator_no_fixture_is_noop(self, triple_workspace):
        generator = StubTestGenerator(FIXTURES / "generated_tests")
        assert generate_tests(generator, "p.Missing", triple_workspace) == []

    def test_external_generator_missing_binary(self, triple_workspace):
        generator = ExternalTestGenerator(["no-such-generator", "{fqn}"])
        with pytest.raises(GeneratorUnavailable):
            generate_tests(generator, "p.Alpha", triple_workspace)
