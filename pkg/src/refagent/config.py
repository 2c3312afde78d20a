"""Engine configuration: defaults, config file, CLI precedence.

The config file is TOML at `<workspace>/refagent.toml`. Recognized keys
are documented in the README; secrets (the API key) come only from the
environment. Precedence is CLI flag > config file > default.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .gateway import BackendConfig
from .quality import CoefficientTable, default_table, literal_table, load_table
from .smells import Thresholds

DEFAULT_JOURNAL = ".refagent/journal"
CONFIG_FILENAME = "refagent.toml"


@dataclass
class AblationFlags:
    context: bool = True
    depgraph: bool = True
    codesearch: bool = True


@dataclass
class EngineConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    token_budget: int = 4096
    max_compile_iters: int = 20
    max_test_iters: int = 20
    seed: int = 0
    thresholds: Thresholds = field(default_factory=Thresholds)
    coefficient_table: CoefficientTable = field(default_factory=default_table)
    ablation: AblationFlags = field(default_factory=AblationFlags)
    source_roots: list[str] = field(default_factory=lambda: ["src/main/java"])
    test_roots: list[str] = field(default_factory=lambda: ["src/test/java"])
    journal_dir: str = DEFAULT_JOURNAL
    subprocess_timeout: float = 600.0
    generated_tests_dir: Optional[str] = None  # stub generator fixture dir
    commit_command: Optional[list[str]] = None  # optional external VCS hook

    def __post_init__(self) -> None:
        if self.max_compile_iters < 1 or self.max_test_iters < 1:
            raise ValueError("iteration caps must be at least 1")
        if self.token_budget < 256:
            raise ValueError("token_budget must be at least 256")


def load_config_file(workspace: Path) -> dict:
    path = Path(workspace) / CONFIG_FILENAME
    if not path.is_file():
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _thresholds_from(data: dict) -> Thresholds:
    kwargs = {}
    for key in (
        "long_method_loc", "complex_method_cc", "long_params",
        "large_class_nom", "large_class_loc",
    ):
        if key in data:
            kwargs[key] = int(data[key])
    if "magic_allowlist" in data:
        kwargs["magic_allowlist"] = frozenset(float(v) for v in data["magic_allowlist"])
    return Thresholds(**kwargs)


def build_config(workspace: Path, overrides: Optional[dict] = None) -> EngineConfig:
    """Merge defaults, the workspace config file, and CLI overrides."""
    merged = load_config_file(workspace)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    backend_data = merged.get("backend", {})
    backend = BackendConfig(
        kind=backend_data.get("kind", "scripted"),
        endpoint=backend_data.get("endpoint", ""),
        model=backend_data.get("model", ""),
        temperature=float(backend_data.get("temperature", 0.7)),
        max_output_tokens=int(backend_data.get("max_output_tokens", 4096)),
        playbook_path=backend_data.get("playbook_path", ""),
    )

    table_choice = merged.get("coefficient_table", "default")
    if isinstance(table_choice, dict):
        table = load_table(table_choice)
    elif table_choice == "literal":
        table = literal_table()
    else:
        table = default_table()

    ablation_data = merged.get("ablation", {})
    ablation = AblationFlags(
        context=bool(ablation_data.get("context", True)),
        depgraph=bool(ablation_data.get("depgraph", True)),
        codesearch=bool(ablation_data.get("codesearch", True)),
    )

    return EngineConfig(
        backend=backend,
        token_budget=int(merged.get("token_budget", 4096)),
        max_compile_iters=int(merged.get("max_compile_iters", 20)),
        max_test_iters=int(merged.get("max_test_iters", 20)),
        seed=int(merged.get("seed", 0)),
        thresholds=_thresholds_from(merged.get("thresholds", {})),
        coefficient_table=table,
        ablation=ablation,
        source_roots=list(merged.get("source_roots", ["src/main/java"])),
        test_roots=list(merged.get("test_roots", ["src/test/java"])),
        journal_dir=str(merged.get("journal_dir", DEFAULT_JOURNAL)),
        subprocess_timeout=float(merged.get("subprocess_timeout", 600.0)),
        generated_tests_dir=merged.get("generated_tests_dir"),
        commit_command=merged.get("commit_command"),
    )
