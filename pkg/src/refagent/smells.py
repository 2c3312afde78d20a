"""Detection of a fixed eight-smell catalog and reduction statistics.

Four implementation smells (long method, complex method, long parameter
list, magic number) and four design smells (deficient encapsulation,
insufficient modularization, unutilized abstraction, cyclic dependency).
New kinds register through SMELL_RULES.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .depgraph import DependencyGraph, find_cycles
from .errors import UndefinedRate
from .metrics import compute_class_metrics, cyclomatic_complexity
from .source_model import DesignModel


@dataclass
class Thresholds:
    long_method_loc: int = 100
    complex_method_cc: int = 8
    long_params: int = 6
    large_class_nom: int = 20
    large_class_loc: int = 1000
    magic_allowlist: frozenset[float] = frozenset({-1.0, 0.0, 1.0, 2.0})


@dataclass
class SmellInstance:
    kind: str
    category: str  # design | implementation
    fqn: str
    method: Optional[str]
    line_range: tuple[int, int]
    evidence: str

    def identity(self) -> tuple[str, str, Optional[str]]:
        """Match key for before/after diffs; line ranges shift, so excluded."""
        return (self.kind, self.fqn, self.method)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "category": self.category,
            "fqn": self.fqn,
            "method": self.method,
            "start": self.line_range[0],
            "end": self.line_range[1],
            "evidence": self.evidence,
        }


@dataclass
class DetectContext:
    model: DesignModel
    graph: DependencyGraph
    thresholds: Thresholds
    entry_points: set[str] = field(default_factory=set)


def _long_method(ctx: DetectContext) -> list[SmellInstance]:
    out = []
    for fqn, decl in ctx.model.types.items():
        for m in decl.methods:
            if m.body_stats.loc > ctx.thresholds.long_method_loc:
                out.append(SmellInstance(
                    "LongMethod", "implementation", fqn, m.signature,
                    m.line_range,
                    f"loc {m.body_stats.loc} > {ctx.thresholds.long_method_loc}",
                ))
    return out


def _complex_method(ctx: DetectContext) -> list[SmellInstance]:
    out = []
    for fqn, decl in ctx.model.types.items():
        for m in decl.methods:
            cc = cyclomatic_complexity(m)
            if cc > ctx.thresholds.complex_method_cc:
                out.append(SmellInstance(
                    "ComplexMethod", "implementation", fqn, m.signature,
                    m.line_range,
                    f"cc {cc} > {ctx.thresholds.complex_method_cc}",
                ))
    return out


def _long_parameter_list(ctx: DetectContext) -> list[SmellInstance]:
    out = []
    for fqn, decl in ctx.model.types.items():
        for m in decl.methods:
            if len(m.params) >= ctx.thresholds.long_params:
                out.append(SmellInstance(
                    "LongParameterList", "implementation", fqn, m.signature,
                    m.line_range,
                    f"params {len(m.params)} >= {ctx.thresholds.long_params}",
                ))
    return out


def _magic_number(ctx: DetectContext) -> list[SmellInstance]:
    allow = ctx.thresholds.magic_allowlist
    out = []
    for fqn, decl in ctx.model.types.items():
        for m in decl.methods:
            for value, line in m.body_stats.numeric_literals:
                if value not in allow:
                    out.append(SmellInstance(
                        "MagicNumber", "implementation", fqn, m.signature,
                        (line, line),
                        f"literal {value:g} outside allowlist",
                    ))
        for f in decl.fields:
            if f.is_constant:
                continue
            for value, line in f.initializer_literals:
                if value not in allow:
                    out.append(SmellInstance(
                        "MagicNumber", "implementation", fqn, None,
                        (line, line),
                        f"literal {value:g} outside allowlist",
                    ))
    return out


def _deficient_encapsulation(ctx: DetectContext) -> list[SmellInstance]:
    out = []
    for fqn, decl in ctx.model.types.items():
        if decl.kind == "interface":
            continue  # interface fields are implicitly constant
        for f in decl.fields:
            if "public" in f.modifiers and not f.is_constant:
                out.append(SmellInstance(
                    "DeficientEncapsulation", "design", fqn, None,
                    (f.line, f.line),
                    f"public field {f.name}",
                ))
    return out


def _insufficient_modularization(ctx: DetectContext) -> list[SmellInstance]:
    out = []
    for fqn, decl in ctx.model.types.items():
        metrics = compute_class_metrics(ctx.model, ctx.graph, fqn)
        if (
            metrics.NOM > ctx.thresholds.large_class_nom
            or metrics.LOC > ctx.thresholds.large_class_loc
        ):
            out.append(SmellInstance(
                "InsufficientModularization", "design", fqn, None,
                decl.line_range,
                f"NOM {metrics.NOM:g}, LOC {metrics.LOC:g}",
            ))
    return out


def _unutilized_abstraction(ctx: DetectContext) -> list[SmellInstance]:
    out = []
    supertypes = set(ctx.model.hierarchy.values())
    implemented = {
        i.fqn
        for decl in ctx.model.types.values()
        for i in decl.interfaces
        if i.fqn is not None
    }
    for fqn, decl in ctx.model.types.items():
        if fqn in ctx.entry_points:
            continue
        if fqn in supertypes or fqn in implemented:
            continue
        if ctx.graph.edges_into(fqn):
            continue
        out.append(SmellInstance(
            "UnutilizedAbstraction", "design", fqn, None,
            decl.line_range,
            "no incoming dependencies and no subtypes",
        ))
    return out


def _cyclic_dependency(ctx: DetectContext) -> list[SmellInstance]:
    out = []
    for cycle in find_cycles(ctx.graph):
        for fqn in cycle:
            decl = ctx.model.types[fqn]
            out.append(SmellInstance(
                "CyclicDependency", "design", fqn, None,
                decl.line_range,
                "member of cycle " + " -> ".join(cycle),
            ))
    return out


SMELL_RULES: dict[str, Callable[[DetectContext], list[SmellInstance]]] = {
    "LongMethod": _long_method,
    "ComplexMethod": _complex_method,
    "LongParameterList": _long_parameter_list,
    "MagicNumber": _magic_number,
    "DeficientEncapsulation": _deficient_encapsulation,
    "InsufficientModularization": _insufficient_modularization,
    "UnutilizedAbstraction": _unutilized_abstraction,
    "CyclicDependency": _cyclic_dependency,
}

CATEGORY_OF = {
    "LongMethod": "implementation",
    "ComplexMethod": "implementation",
    "LongParameterList": "implementation",
    "MagicNumber": "implementation",
    "DeficientEncapsulation": "design",
    "InsufficientModularization": "design",
    "UnutilizedAbstraction": "design",
    "CyclicDependency": "design",
}


def detect_smells(
    model: DesignModel,
    graph: DependencyGraph,
    thresholds: Thresholds | None = None,
    entry_points: set[str] | None = None,
) -> list[SmellInstance]:
    ctx = DetectContext(
        model=model,
        graph=graph,
        thresholds=thresholds or Thresholds(),
        entry_points=entry_points if entry_points is not None else _main_classes(model),
    )
    found: list[SmellInstance] = []
    for rule in SMELL_RULES.values():
        found.extend(rule(ctx))
    found.sort(key=lambda s: (s.fqn, s.line_range, s.kind, s.method or ""))
    return found


def _main_classes(model: DesignModel) -> set[str]:
    """Default entry points: classes declaring a main(String[]) method."""
    mains = set()
    for fqn, decl in model.types.items():
        for m in decl.methods:
            if m.name == "main" and "static" in m.modifiers:
                mains.add(fqn)
    return mains


def smell_diff(
    before: list[SmellInstance], after: list[SmellInstance]
) -> dict[str, dict[str, int]]:
    """Per-kind removed/introduced/unchanged counts, matched by identity."""
    kinds = sorted({s.kind for s in before} | {s.kind for s in after})
    result: dict[str, dict[str, int]] = {}
    for kind in kinds:
        before_ids = [s.identity() for s in before if s.kind == kind]
        after_ids = [s.identity() for s in after if s.kind == kind]
        remaining = list(after_ids)
        unchanged = 0
        for ident in before_ids:
            if ident in remaining:
                remaining.remove(ident)
                unchanged += 1
        result[kind] = {
            "removed": len(before_ids) - unchanged,
            "introduced": len(remaining),
            "unchanged": unchanged,
        }
    return result


def smell_reduction_rate(before_count: int, after_count: int) -> float:
    if before_count == 0:
        raise UndefinedRate("smell reduction rate undefined for zero baseline")
    return (before_count - after_count) / before_count * 100.0
