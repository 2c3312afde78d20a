"""Low-level design metrics for planner context and quality scoring.

Definitions follow the original object-oriented design quality model and
are normative for this engine: the class-level eleven (DSC and NOH at
design level) plus auxiliary LOC, cyclomatic complexity, and LCOM.
Degenerate cases: CAM is 0 when a class has no non-constructor methods
or no parameter types; DAM is 1 when there are no fields; MFA is 0 when
nothing is inherited or declared.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dataclass_fields

from .depgraph import DependencyGraph
from .source_model import DesignModel, MethodDecl, ancestors


@dataclass
class MethodMetrics:
    cc: int
    loc: int
    param_count: int


@dataclass
class MetricVector:
    # class-level
    DCC: float = 0.0
    CAM: float = 0.0
    CIS: float = 0.0
    NOM: float = 0.0
    NOP: float = 0.0
    DAM: float = 0.0
    MOA: float = 0.0
    MFA: float = 0.0
    ANA: float = 0.0
    LCOM: float = 0.0
    LOC: float = 0.0
    max_cc: float = 0.0
    # design-level
    DSC: float = 0.0
    NOH: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in dataclass_fields(self)}

    @classmethod
    def metric_names(cls) -> list[str]:
        return [f.name for f in dataclass_fields(cls)]


def cyclomatic_complexity(method: MethodDecl) -> int:
    """1 + decision points (if/for/while/case/catch/&&/||/ternary)."""
    return 1 + method.body_stats.decision_points


def method_metrics(method: MethodDecl) -> MethodMetrics:
    return MethodMetrics(
        cc=cyclomatic_complexity(method),
        loc=method.body_stats.loc,
        param_count=len(method.params),
    )


def _inherited_not_overridden(model: DesignModel, fqn: str) -> int:
    decl = model.type_of(fqn)
    own = {m.signature for m in decl.methods if not m.is_constructor}
    inherited: set[str] = set()
    for ancestor in ancestors(model, fqn):
        for m in model.type_of(ancestor).methods:
            if m.is_constructor or "private" in m.modifiers:
                continue
            if m.signature not in own:
                inherited.add(m.signature)
    return len(inherited)


def compute_class_metrics(
    model: DesignModel, graph: DependencyGraph, fqn: str
) -> MetricVector:
    decl = model.type_of(fqn)
    plain_methods = [m for m in decl.methods if not m.is_constructor]

    # DCC: distinct project types referenced via member-type edges
    member_kinds = {"field_type", "param_type", "return_type"}
    dcc_targets = {
        dst for src, dst, kind in graph.edges
        if src == fqn and kind in member_kinds
    }

    # CAM over non-constructor methods
    param_sets = [
        {t.name for _, t in m.params} for m in plain_methods
    ]
    union: set[str] = set().union(*param_sets) if param_sets else set()
    if plain_methods and union:
        cam = sum(len(p) for p in param_sets) / (len(plain_methods) * len(union))
    else:
        cam = 0.0

    cis = sum(1 for m in plain_methods if "public" in m.modifiers)
    nom = len(plain_methods)

    if decl.kind == "interface":
        nop = len(plain_methods)
    else:
        nop = sum(
            1 for m in plain_methods
            if "abstract" in m.modifiers
            or not ({"static", "final", "private"} & m.modifiers)
        )

    hidden = sum(
        1 for f in decl.fields if {"private", "protected"} & f.modifiers
    )
    dam = hidden / len(decl.fields) if decl.fields else 1.0

    moa = sum(1 for f in decl.fields if f.type.fqn is not None)

    inherited = _inherited_not_overridden(model, fqn)
    declared = nom
    mfa = inherited / (inherited + declared) if inherited + declared else 0.0

    ana = len(ancestors(model, fqn))

    if plain_methods and decl.fields:
        touches = sum(
            sum(1 for m in plain_methods if f.name in m.body_stats.accessed_fields)
            for f in decl.fields
        )
        lcom = 1.0 - touches / (nom * len(decl.fields))
        lcom = min(1.0, max(0.0, lcom))
    else:
        lcom = 0.0

    max_cc = max((cyclomatic_complexity(m) for m in decl.methods), default=0)

    return MetricVector(
        DCC=float(len(dcc_targets)),
        CAM=cam,
        CIS=float(cis),
        NOM=float(nom),
        NOP=float(nop),
        DAM=dam,
        MOA=float(moa),
        MFA=mfa,
        ANA=float(ana),
        LCOM=lcom,
        LOC=float(decl.loc),
        max_cc=float(max_cc),
    )


def compute_design_metrics(model: DesignModel) -> tuple[float, float, float]:
    """Returns (DSC, NOH, mean ANA) over the whole model."""
    dsc = len(model.types)
    # NOH: root types with at least one project-internal descendant, found
    # by walking every inheritance chain to its top
    tops: set[str] = set()
    for child in model.hierarchy:
        node = child
        while node in model.hierarchy:
            node = model.hierarchy[node]
        tops.add(node)
    noh = len(tops)
    mean_ana = (
        sum(len(ancestors(model, fqn)) for fqn in model.types) / dsc
        if dsc else 0.0
    )
    return float(dsc), float(noh), mean_ana


def aggregate_design_vector(
    model: DesignModel, graph: DependencyGraph
) -> MetricVector:
    """Design-level vector: per-class metrics averaged, DSC/NOH direct."""
    per_class = [
        compute_class_metrics(model, graph, fqn) for fqn in sorted(model.types)
    ]
    dsc, noh, _ = compute_design_metrics(model)
    result = MetricVector(DSC=dsc, NOH=noh)
    if per_class:
        for name in MetricVector.metric_names():
            if name in ("DSC", "NOH"):
                continue
            setattr(
                result, name,
                sum(getattr(v, name) for v in per_class) / len(per_class),
            )
    return result
