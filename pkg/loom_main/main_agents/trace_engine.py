# loom_main/main_agents/trace_engine.py
"""Digital-thread queries over typed edges.

Edge polarity (source -> target):
  DerivedFrom, Satisfies, Realizes, Supports   point upstream (toward strategy)
  AllocatedTo                                  points downstream
  Contains, AssignedConfiguration              structural, walked both ways by trace
  ConnectsTo, ExchangesWith                    lateral, impact propagation only
"""
from __future__ import annotations

import logging
from typing import Callable, Dict, Iterator, List, Optional, Set, Tuple, Union

import networkx as nx

from loom_main.config import AVAILABILITY_PROPERTY, FAILED
from loom_main.errors import ModelInputError
from loom_main.main_agents.model_core import ModelIndex
from loom_main.models.models_graph import Element, ElementKind, Model, Relationship, RelationshipKind, RequirementSubkind
from loom_main.models.models_reports import (
    CoverageEntry,
    CoverageReport,
    CoverageStatus,
    CoverageSummary,
    EvidenceEntry,
    ImpactEntry,
    ImpactReport,
    OrphanReport,
    TraceDirection,
    TraceHop,
    TracePath,
)

logger = logging.getLogger(__name__)

R = RelationshipKind
UPSTREAM_KINDS = frozenset({R.DerivedFrom, R.Satisfies, R.Realizes, R.Supports})
DOWNSTREAM_KINDS = frozenset({R.AllocatedTo})
STRUCTURAL_KINDS = frozenset({R.Contains, R.AssignedConfiguration})
LATERAL_KINDS = frozenset({R.ConnectsTo, R.ExchangesWith})

TRACE_ANCHORS = frozenset({ElementKind.StrategicGoal, ElementKind.EnterpriseObjective})
STRATEGIC_KINDS = frozenset({ElementKind.StrategicGoal, ElementKind.EnterpriseObjective,
                             ElementKind.BusinessDriver, ElementKind.SecurityDriver})

Hop = Tuple[str, str, RelationshipKind]


# -----------------------
# EDGE EXPANSION
# -----------------------
def trace_hops(rel: Relationship, direction: TraceDirection) -> Iterator[Hop]:
    s, t, kind = rel.source, rel.target, rel.kind
    if kind in STRUCTURAL_KINDS:
        yield s, t, kind
        yield t, s, kind
    elif kind in UPSTREAM_KINDS:
        yield (s, t, kind) if direction == TraceDirection.Upstream else (t, s, kind)
    elif kind in DOWNSTREAM_KINDS:
        yield (t, s, kind) if direction == TraceDirection.Upstream else (s, t, kind)


def propagation_hops(rel: Relationship) -> Iterator[Hop]:
    """Impact spreads to dependents, connected peers, owned structure and derived children."""
    s, t, kind = rel.source, rel.target, rel.kind
    if kind in (R.Satisfies, R.Realizes, R.DerivedFrom):
        yield t, s, kind
    elif kind in LATERAL_KINDS:
        yield s, t, kind
        yield t, s, kind
    elif kind in STRUCTURAL_KINDS:
        yield s, t, kind


def _live_relationships(index: ModelIndex) -> List[Relationship]:
    return [index.relationships[k] for k in sorted(index.relationships)
            if index.relationships[k].source in index.elements and index.relationships[k].target in index.elements]


def trace_graph(index: ModelIndex, direction: TraceDirection) -> nx.MultiDiGraph:
    graph = nx.MultiDiGraph()
    graph.add_nodes_from(sorted(index.elements))
    for rel in _live_relationships(index):
        for u, v, kind in trace_hops(rel, direction):
            graph.add_edge(u, v, key=kind.value)
    return graph


def propagation_graph(index: ModelIndex) -> nx.DiGraph:
    hops: Dict[Tuple[str, str], str] = {}
    for rel in _live_relationships(index):
        for u, v, kind in propagation_hops(rel):
            if u != v:
                hops[(u, v)] = min(hops.get((u, v), kind.value), kind.value)
    graph = nx.DiGraph()
    graph.add_nodes_from(sorted(index.elements))
    for (u, v) in sorted(hops):
        graph.add_edge(u, v, kind=hops[(u, v)])
    return graph


def _coerce_direction(direction: Union[str, TraceDirection]) -> TraceDirection:
    try:
        return TraceDirection(direction)
    except ValueError:
        pass
    for member in TraceDirection:
        if member.value.lower() == str(direction).lower():
            return member
    raise ModelInputError(f"unknown trace direction {direction!r}")


# -----------------------
# TRACE
# -----------------------
def trace(model: Model, origin: str, direction: Union[str, TraceDirection] = TraceDirection.Upstream,
          max_depth: Optional[int] = None) -> List[TracePath]:
    """Every simple path from origin along edges of the given polarity, sorted by hop ids."""
    direction = _coerce_direction(direction)
    index = ModelIndex(model)
    index.get(origin)
    if max_depth is not None and max_depth < 1:
        return []
    graph = trace_graph(index, direction)

    paths: List[TracePath] = []
    for target in sorted(nx.descendants(graph, origin)):
        for edge_path in nx.all_simple_edge_paths(graph, origin, target, cutoff=max_depth):
            hops = [TraceHop(element_id=v, kind=RelationshipKind(key)) for _u, v, key in edge_path]
            paths.append(TracePath(origin=origin, hops=hops))
    paths.sort(key=TracePath.sort_key)
    logger.debug("[trace] %s %s: %d paths", direction.value, origin, len(paths))
    return paths


def reachable(model: Model, origin: str, direction: Union[str, TraceDirection]) -> Set[str]:
    index = ModelIndex(model)
    index.get(origin)
    return nx.descendants(trace_graph(index, _coerce_direction(direction)), origin)


# -----------------------
# COVERAGE
# -----------------------
def down_elements(index: ModelIndex) -> Set[str]:
    """Failed elements plus everything they own."""
    down: Set[str] = set()
    for element in index.elements.values():
        if element.properties.get(AVAILABILITY_PROPERTY) == FAILED:
            down.update(e.id for e in element.walk())
    return down


def match_requirements(family: Optional[str] = None,
                       subkind: Optional[Union[str, RequirementSubkind]] = None) -> Callable[[Element], bool]:
    wanted_subkind = RequirementSubkind(subkind) if subkind else None

    def _predicate(element: Element) -> bool:
        if family and element.properties.get("family", "").lower() != family.lower():
            return False
        return wanted_subkind is None or element.subkind == wanted_subkind
    return _predicate


def _satisfiers(index: ModelIndex, down: Set[str]) -> Dict[str, List[str]]:
    satisfied_by: Dict[str, Set[str]] = {}
    for rel in _live_relationships(index):
        if rel.kind == R.Satisfies and rel.source not in down:
            satisfied_by.setdefault(rel.target, set()).add(rel.source)
    return {k: sorted(v) for k, v in satisfied_by.items()}


def coverage_report(model: Model, requirement_filter: Optional[Callable[[Element], bool]] = None) -> CoverageReport:
    """Direct rule: a requirement is Satisfied iff an available element has a Satisfies edge to it."""
    index = ModelIndex(model)
    satisfied_by = _satisfiers(index, down_elements(index))
    children: Dict[str, Set[str]] = {}
    for rel in _live_relationships(index):
        if rel.kind == R.DerivedFrom and index.elements[rel.source].kind == ElementKind.Requirement:
            children.setdefault(rel.target, set()).add(rel.source)

    entries = []
    for req_id in sorted(index.elements):
        element = index.elements[req_id]
        if element.kind != ElementKind.Requirement:
            continue
        if requirement_filter is not None and not requirement_filter(element):
            continue
        sources = satisfied_by.get(req_id, [])
        kids = children.get(req_id, set())
        entries.append(CoverageEntry(
            requirement_id=req_id,
            satisfied_by=sources,
            status=CoverageStatus.Satisfied if sources else CoverageStatus.Unsatisfied,
            derived_total=len(kids),
            derived_satisfied=sum(1 for k in kids if k in satisfied_by),
        ))
    satisfied = sum(1 for e in entries if e.status == CoverageStatus.Satisfied)
    return CoverageReport(
        requirements=entries,
        summary=CoverageSummary(total=len(entries), satisfied=satisfied, unsatisfied=len(entries) - satisfied),
    )


def find_orphans(model: Model) -> OrphanReport:
    index = ModelIndex(model)
    coverage = coverage_report(model)
    graph = trace_graph(index, TraceDirection.Upstream)
    traced: Set[str] = set()
    for element_id, element in index.elements.items():
        if element.kind in TRACE_ANCHORS:
            traced.add(element_id)
            traced.update(nx.ancestors(graph, element_id))
    untraceable = sorted(
        element_id for element_id, element in index.elements.items()
        if element.kind not in STRATEGIC_KINDS and element_id not in traced
    )
    return OrphanReport(
        unsatisfied_requirements=[e.requirement_id for e in coverage.requirements
                                  if e.status == CoverageStatus.Unsatisfied],
        untraceable_elements=untraceable,
    )


# -----------------------
# IMPACT
# -----------------------
def impact_analysis(model: Model, origin: str) -> ImpactReport:
    """Breadth-first spread under the propagation rules; one shortest witness path per element."""
    index = ModelIndex(model)
    index.get(origin)
    graph = propagation_graph(index)
    shortest = nx.single_source_shortest_path(graph, origin)

    affected = []
    for element_id, nodes in shortest.items():
        if element_id == origin:
            continue
        hops = [TraceHop(element_id=v, kind=RelationshipKind(graph.edges[u, v]["kind"]))
                for u, v in zip(nodes, nodes[1:])]
        affected.append(ImpactEntry(element_id=element_id, distance=len(hops),
                                    path=TracePath(origin=origin, hops=hops)))
    affected.sort(key=lambda e: (e.distance, e.element_id))
    return ImpactReport(
        origin=origin,
        affected=affected,
        affected_requirements=sorted(e.element_id for e in affected
                                     if index.elements[e.element_id].kind == ElementKind.Requirement),
    )


# -----------------------
# EVIDENCE
# -----------------------
def evidence_index(model: Model) -> List[EvidenceEntry]:
    """Body-of-evidence listing: each requirement's own documentation and that of its satisfiers."""
    index = ModelIndex(model)
    satisfied_by = _satisfiers(index, set())
    entries = []
    for req_id in sorted(index.elements):
        element = index.elements[req_id]
        if element.kind != ElementKind.Requirement:
            continue
        via = {src: list(index.elements[src].documentation)
               for src in satisfied_by.get(req_id, []) if index.elements[src].documentation}
        if element.documentation or via:
            entries.append(EvidenceEntry(requirement_id=req_id, own=list(element.documentation), via=via))
    return entries
