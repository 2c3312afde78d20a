"""Class-level dependency graph and refactoring-context assembly.

The graph plays the role of an external dependency-analysis tool: one
node per project type, typed edges for inheritance, member types, and
invocations. External targets are kept in a side list and never become
nodes. The code-search half assembles a token-budgeted bundle of the
target class plus its most-coupled first-degree dependents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import TargetOverBudget, UnknownType
from .source_model import PRIMITIVES, DesignModel, TypeRef

EDGE_KINDS = (
    "extends",
    "implements",
    "field_type",
    "param_type",
    "return_type",
    "invocation",
    "import",
)


@dataclass
class DependencyGraph:
    nodes: set[str]
    edges: set[tuple[str, str, str]]  # (from, to, kind)
    external_edges: set[tuple[str, str, str]] = field(default_factory=set)

    def edges_from(self, fqn: str) -> set[tuple[str, str, str]]:
        return {e for e in self.edges if e[0] == fqn}

    def edges_into(self, fqn: str) -> set[tuple[str, str, str]]:
        return {e for e in self.edges if e[1] == fqn}

    def to_json_dict(self) -> dict:
        return {
            "nodes": sorted(self.nodes),
            "edges": [
                {"from": f, "to": t, "kind": k}
                for f, t, k in sorted(self.edges)
            ],
            "external_edges": [
                {"from": f, "to": t, "kind": k}
                for f, t, k in sorted(self.external_edges)
            ],
        }


@dataclass
class CodeBundle:
    target_fqn: str
    target_source: str
    dependent_sources: dict[str, str]
    truncated: bool


def _add_edge(
    graph: DependencyGraph, src: str, ref: TypeRef, kind: str
) -> None:
    if ref.fqn is not None:
        if ref.fqn != src:
            graph.edges.add((src, ref.fqn, kind))
    elif ref.name not in PRIMITIVES:
        graph.external_edges.add((src, ref.name, kind))


def extract_dependencies(model: DesignModel) -> DependencyGraph:
    """Derive the typed class dependency graph from a built model."""
    graph = DependencyGraph(nodes=set(model.types), edges=set())
    for fqn, decl in model.types.items():
        if decl.supertype is not None:
            _add_edge(graph, fqn, decl.supertype, "extends")
        for iface in decl.interfaces:
            _add_edge(graph, fqn, iface, "implements")
        for f in decl.fields:
            _add_edge(graph, fqn, f.type, "field_type")
        for m in decl.methods:
            for _, ptype in m.params:
                _add_edge(graph, fqn, ptype, "param_type")
            if m.return_type is not None:
                _add_edge(graph, fqn, m.return_type, "return_type")
            for inv in m.body_stats.invoked_types:
                _add_edge(graph, fqn, inv, "invocation")
        unit = model.unit_of.get(fqn)
        if unit is not None:
            for imp in unit.imports:
                if imp.endswith(".*"):
                    continue
                if imp in model.types and imp != fqn:
                    graph.edges.add((fqn, imp, "import"))
    return graph


def first_degree_dependents(graph: DependencyGraph, fqn: str) -> set[str]:
    """Classes with any direct edge onto the target."""
    if fqn not in graph.nodes:
        raise UnknownType(fqn)
    return {src for src, dst, _ in graph.edges if dst == fqn}


def first_degree_dependencies(graph: DependencyGraph, fqn: str) -> set[str]:
    if fqn not in graph.nodes:
        raise UnknownType(fqn)
    return {dst for src, dst, _ in graph.edges if src == fqn}


def related_tests(
    graph: DependencyGraph, fqn: str, test_fqns: Iterable[str]
) -> set[str]:
    """Test types exercising the target, via graph edges or naming convention."""
    if fqn not in graph.nodes:
        raise UnknownType(fqn)
    test_fqns = set(test_fqns)
    related = {
        src
        for src, dst, _ in graph.edges
        if dst == fqn and src in test_fqns
    }
    simple = fqn.rsplit(".", 1)[-1]
    for candidate in test_fqns:
        test_simple = candidate.rsplit(".", 1)[-1]
        if test_simple in (f"{simple}Test", f"Test{simple}"):
            related.add(candidate)
    return related


def _source_of(model: DesignModel, fqn: str) -> str:
    unit = model.unit_of.get(fqn)
    return unit.raw_text if unit is not None else ""


def collect_bundle(
    model: DesignModel,
    graph: DependencyGraph,
    fqn: str,
    token_budget: int,
    estimate_tokens=None,
) -> CodeBundle:
    """Assemble target + dependent sources within the token budget.

    Dependents are added in descending order of distinct edge kinds into
    the target (ties broken by FQN) until the budget runs out.
    """
    if estimate_tokens is None:
        from .gateway import estimate_tokens as estimate_tokens  # noqa: PLC0415
    if fqn not in graph.nodes:
        raise UnknownType(fqn)
    target_source = _source_of(model, fqn)
    used = estimate_tokens(target_source)
    if used > token_budget:
        raise TargetOverBudget(fqn, used, token_budget)

    dependents = first_degree_dependents(graph, fqn)
    kind_counts = {
        dep: len({k for src, dst, k in graph.edges if src == dep and dst == fqn})
        for dep in dependents
    }
    ordered = sorted(dependents, key=lambda d: (-kind_counts[d], d))

    included: dict[str, str] = {}
    truncated = False
    for dep in ordered:
        source = _source_of(model, dep)
        cost = estimate_tokens(source)
        if used + cost > token_budget:
            truncated = True
            continue
        included[dep] = source
        used += cost
    return CodeBundle(
        target_fqn=fqn,
        target_source=target_source,
        dependent_sources=included,
        truncated=truncated,
    )


def find_cycles(graph: DependencyGraph) -> list[list[str]]:
    """Strongly connected components of size > 1, canonically rotated."""
    adjacency: dict[str, list[str]] = {n: [] for n in graph.nodes}
    for src, dst, _ in graph.edges:
        adjacency[src].append(dst)

    # iterative Tarjan
    index: dict[str, int] = {}
    lowlink: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = [0]
    sccs: list[list[str]] = []

    def strongconnect(root: str) -> None:
        work = [(root, 0)]
        while work:
            node, pi = work[-1]
            if pi == 0:
                index[node] = lowlink[node] = counter[0]
                counter[0] += 1
                stack.append(node)
                on_stack.add(node)
            advanced = False
            neighbors = adjacency[node]
            for i in range(pi, len(neighbors)):
                succ = neighbors[i]
                if succ not in index:
                    work[-1] = (node, i + 1)
                    work.append((succ, 0))
                    advanced = True
                    break
                if succ in on_stack:
                    lowlink[node] = min(lowlink[node], index[succ])
            if advanced:
                continue
            work.pop()
            if lowlink[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                if len(component) > 1:
                    sccs.append(component)
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])

    for node in sorted(graph.nodes):
        if node not in index:
            strongconnect(node)

    canonical: list[list[str]] = []
    for component in sccs:
        least = min(component)
        # rotate the member list to start at the lexicographically least FQN
        ordered = sorted(component)
        pivot = ordered.index(least)
        canonical.append(ordered[pivot:] + ordered[:pivot])
    canonical.sort(key=lambda c: c[0])
    return canonical
