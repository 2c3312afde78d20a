import random
import shutil
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
TINY = FIXTURES / "tiny"
TRIPLE = FIXTURES / "triple"
PLAYBOOKS = FIXTURES / "playbooks"


@pytest.fixture
def tiny_workspace(tmp_path):
    ws = tmp_path / "tiny"
    shutil.copytree(TINY, ws)
    return ws


@pytest.fixture
def triple_workspace(tmp_path):
    ws = tmp_path / "triple"
    shutil.copytree(TRIPLE, ws)
    return ws


def copy_triple(dest: Path) -> Path:
    shutil.copytree(TRIPLE, dest)
    return dest


# -- random Java class generation with construction-time oracles -------------

# statement templates with known decision-point contributions
STATEMENTS = [
    ("{f} = {f} + 1;", 0),
    ("if ({f} > 0) { {f} = 1; }", 1),
    ("if ({f} > 0 && {f} < 9) { {f} = 2; }", 2),
    ("if ({f} > 0 || {f} < 9) { {f} = 3; }", 2),
    ("for (int i9 = 0; i9 < 3; i9 = i9 + 1) { {f} = {f} + 1; }", 1),
    ("while ({f} > 0) { {f} = {f} - 1; }", 1),
    ("do { {f} = {f} - 1; } while ({f} > 0);", 1),
    ("{f} = {f} > 5 ? 1 : 0;", 1),
    ("try { {f} = 1; } catch (Exception e9) { {f} = 2; }", 1),
    (
        "switch ({f}) { case 1: {f} = 1; break; case 2: {f} = 2; break; "
        "default: {f} = 0; }",
        2,
    ),
]

PRIMITIVE_POOL = ["int", "double", "boolean"]
EXTERNAL_POOL = ["String", "Object"]


class ClassSpec:
    """Construction-time ground truth for one generated class."""

    def __init__(self, name):
        self.name = name
        self.extends = None  # simple name of the base class or None
        self.fields = []  # (name, type, modifiers)
        self.methods = []  # dicts: name, params [(name, type)], dps, accessed, public


def _gen_class(rng, name, project_pool, base=None):
    spec = ClassSpec(name)
    spec.extends = base
    n_fields = rng.randint(0, 4)
    for i in range(n_fields):
        visibility = rng.choice(["private", "public", "protected", ""])
        type_pool = PRIMITIVE_POOL + EXTERNAL_POOL + [
            t for t in project_pool if t != name
        ]
        spec.fields.append((f"f{i}", rng.choice(type_pool), visibility))
    int_fields = [f for f, t, _ in spec.fields if t == "int"]
    n_methods = rng.randint(0, 5)
    for i in range(n_methods):
        n_params = rng.randint(0, 3)
        params = []
        for j in range(n_params):
            type_pool = PRIMITIVE_POOL + EXTERNAL_POOL + [
                t for t in project_pool if t != name
            ]
            params.append((f"p{j}", rng.choice(type_pool)))
        statements = []
        dps = 0
        target = rng.choice(int_fields) if int_fields else None
        accessed = set()
        if target is not None:
            for _ in range(rng.randint(0, 4)):
                template, dp = rng.choice(STATEMENTS)
                statements.append(template.replace("{f}", target))
                dps += dp
            if statements:
                accessed.add(target)
        spec.methods.append(
            {
                "name": f"m{i}",
                "params": params,
                "statements": statements,
                "dps": dps,
                "accessed": accessed,
                "public": rng.random() < 0.7,
                "return": rng.choice(
                    ["void"] + PRIMITIVE_POOL + [
                        t for t in project_pool if t != name
                    ]
                ),
            }
        )
    return spec


def _render(spec, package="q"):
    lines = [f"package {package};", "", f"public class {spec.name}"]
    if spec.extends:
        lines[-1] += f" extends {spec.extends}"
    lines[-1] += " {"
    for fname, ftype, visibility in spec.fields:
        prefix = f"    {visibility} " if visibility else "    "
        lines.append(f"{prefix}{ftype} {fname};")
    for m in spec.methods:
        visibility = "public " if m["public"] else ""
        params = ", ".join(f"{t} {n}" for n, t in m["params"])
        lines.append(f"    {visibility}{m['return']} {m['name']}({params}) {{")
        ret = m["return"]
        for stmt in m["statements"]:
            lines.append(f"        {stmt}")
        if ret == "int":
            lines.append("        return 0;")
        elif ret == "double":
            lines.append("        return 0.0;")
        elif ret == "boolean":
            lines.append("        return true;")
        elif ret != "void":
            lines.append("        return null;")
        lines.append("    }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def make_random_project(seed, n_classes=3):
    """Random project with per-class ground-truth specs.

    Returns (sources, specs): sources maps simple name -> java text,
    specs maps simple name -> ClassSpec with construction-time truth.
    """
    rng = random.Random(seed)
    names = [f"C{seed % 1000}x{i}" for i in range(n_classes)]
    specs = {}
    for i, name in enumerate(names):
        base = None
        if i > 0 and rng.random() < 0.5:
            base = names[rng.randrange(i)]
        specs[name] = _gen_class(rng, name, names, base=base)
    sources = {name: _render(spec) for name, spec in specs.items()}
    return sources, specs
