# loom_main/main_agents/catalog_ingest.py
"""Requirement ingestion from an OSCAL control catalog and a normalized CCI list.

Controls and enhancements become Cybersecurity requirements (id = OSCAL control
id, e.g. ``ac-2.1``); CCIs become DerivedCybersecurity requirements (id = CCI id).
Every ingested requirement hangs off the RMF root through DerivedFrom edges
pointing child -> parent.
"""
from __future__ import annotations

import logging
import re
from typing import Any, Dict, Iterator, List, Optional, Set, Tuple, Union

import networkx as nx
from pydantic import ValidationError
from tqdm import tqdm

from loom_main.errors import ModelInputError, ModelParseError
from loom_main.main_agents.model_core import ModelIndex
from loom_main.main_agents.model_store import digest_text, dumps_canonical, parse_json
from loom_main.models.models_graph import (
    Element,
    ElementKind,
    Layer,
    Model,
    Relationship,
    RelationshipKind,
    RequirementSubkind,
    free_relationship_id,
)
from loom_main.models.models_reports import (
    CciRecord,
    ControlRecord,
    IngestReport,
    RequirementRow,
    RequirementStats,
    SkippedRecord,
)

logger = logging.getLogger(__name__)

CATALOG_TAG = "nist-800-53-r5"
CCI_TAG = "cci"

_CONTROL_RE = re.compile(r"^\s*([a-z]{2})-(\d+)(?:\s*\(\s*(\d+)\s*\)|\.(\d+))?", re.IGNORECASE)

Document = Union[str, bytes, Dict[str, Any], List[Any]]


def normalize_control_id(raw: str) -> str:
    """AC-2 (1) / AC-2(1) / ac-2.1 -> ac-2.1; statement suffixes are dropped (AC-1 a 1 -> ac-1)."""
    match = _CONTROL_RE.match(raw or "")
    if not match:
        return (raw or "").strip().lower()
    family, number, enh_paren, enh_dot = match.groups()
    control_id = f"{family.lower()}-{int(number)}"
    enhancement = enh_paren or enh_dot
    return f"{control_id}.{int(enhancement)}" if enhancement else control_id


def _load_document(document: Document, what: str) -> Tuple[Any, str]:
    """Return (parsed data, sha256 of the source text)."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    if isinstance(document, str):
        return parse_json(document, what), digest_text(document)
    return document, digest_text(dumps_canonical(document))


# -----------------------
# PARSERS
# -----------------------
def _prop(control: Dict[str, Any], name: str) -> Optional[str]:
    for prop in control.get("props", []) or []:
        if prop.get("name") == name:
            return prop.get("value")
    return None


def _walk_controls(controls: List[Dict[str, Any]], family: str, parent: Optional[str]) -> Iterator[ControlRecord]:
    for control in controls or []:
        raw_id = control.get("id")
        if not raw_id:
            raise ModelParseError("catalog control without id")
        control_id = normalize_control_id(raw_id)
        yield ControlRecord(
            control_id=control_id,
            title=control.get("title", ""),
            family=family,
            is_enhancement=parent is not None,
            parent_control_id=parent,
            label=_prop(control, "label") or control_id.upper(),
            withdrawn=_prop(control, "status") == "withdrawn",
        )
        yield from _walk_controls(control.get("controls", []), family, control_id)


def _walk_groups(groups: List[Dict[str, Any]]) -> Iterator[ControlRecord]:
    for group in groups or []:
        family = (group.get("id") or "").lower()
        yield from _walk_controls(group.get("controls", []), family, None)
        yield from _walk_groups(group.get("groups", []))


def parse_oscal_catalog(document: Document) -> List[ControlRecord]:
    """Flatten catalog.groups[].controls[] (enhancements nested) into parent-first records."""
    data, _ = _load_document(document, "OSCAL catalog")
    if not isinstance(data, dict) or not isinstance(data.get("catalog"), dict):
        raise ModelParseError("not an OSCAL catalog: missing top-level 'catalog' object")
    catalog = data["catalog"]
    records = list(_walk_groups(catalog.get("groups", [])))
    for control in catalog.get("controls", []) or []:
        family = normalize_control_id(control.get("id", "")).split("-")[0]
        records.extend(_walk_controls([control], family, None))
    return records


def parse_cci_list(document: Document) -> List[CciRecord]:
    data, _ = _load_document(document, "CCI list")
    if isinstance(data, dict) and "ccis" in data:
        data = data["ccis"]
    if not isinstance(data, list):
        raise ModelParseError("CCI list must be an array of {cci_id, definition, control_ids}")
    try:
        return [CciRecord.model_validate(entry) for entry in data]
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ModelParseError(f"malformed CCI record at {first['loc']}: {first['msg']}") from None


# -----------------------
# INGEST
# -----------------------
class _Batch:
    """Id and triple sets kept in step with bulk appends."""

    def __init__(self, model: Model):
        index = ModelIndex(model)
        self.model = model
        self.kinds: Dict[str, ElementKind] = {k: e.kind for k, e in index.elements.items()}
        self.triples: Set[Tuple] = set(index.triples)
        self.rel_ids: Set[str] = set(index.relationships)

    def add_element(self, element: Element) -> None:
        self.model.elements.append(element)
        self.kinds[element.id] = element.kind

    def link(self, source: str, target: str) -> bool:
        kind = RelationshipKind.DerivedFrom
        if (kind, source, target) in self.triples:
            return False
        rel_id = free_relationship_id(kind, source, target, self.rel_ids)
        self.model.relationships.append(Relationship(id=rel_id, kind=kind, source=source, target=target))
        self.triples.add((kind, source, target))
        self.rel_ids.add(rel_id)
        return True


def _control_element(record: ControlRecord) -> Element:
    return Element(
        id=record.control_id,
        name=f"{record.label} {record.title}".strip(),
        kind=ElementKind.Requirement,
        subkind=RequirementSubkind.Cybersecurity,
        layer_tags={Layer.Requirements},
        properties={"family": record.family, "label": record.label or record.control_id.upper()},
        tags={CATALOG_TAG},
    )


def ingest_oscal_catalog(model: Model, document: Document, rmf_root: str,
                         progress: bool = False) -> Tuple[Model, IngestReport]:
    data, digest = _load_document(document, "OSCAL catalog")
    records = parse_oscal_catalog(data)
    batch = _Batch(model)
    if rmf_root not in batch.kinds:
        ModelIndex(model).get(rmf_root)  # raises NotFoundError
    if batch.kinds[rmf_root] != ElementKind.Requirement:
        raise ModelInputError(f"rmf_root {rmf_root} must be a Requirement")

    report = IngestReport(source_digest=digest)
    for record in tqdm(records, desc="controls", disable=not progress):
        if record.withdrawn:
            report.skipped.append(SkippedRecord(record_id=record.control_id, reason="withdrawn"))
            continue
        parent = record.parent_control_id if record.is_enhancement else rmf_root
        if batch.kinds.get(parent) != ElementKind.Requirement:
            report.skipped.append(SkippedRecord(record_id=record.control_id, reason="parent-absent"))
            continue
        if record.control_id in batch.kinds:
            report.skipped.append(SkippedRecord(record_id=record.control_id, reason="already-present"))
            if batch.kinds[record.control_id] != ElementKind.Requirement:
                continue
        else:
            batch.add_element(_control_element(record))
            report.elements_created += 1
        if batch.link(record.control_id, parent):
            report.edges_created += 1

    logger.info("[ingest] catalog: %d elements, %d edges, %d skipped",
                report.elements_created, report.edges_created, len(report.skipped))
    return model, report


def ingest_cci_list(model: Model, document: Document, progress: bool = False) -> Tuple[Model, IngestReport]:
    data, digest = _load_document(document, "CCI list")
    records = parse_cci_list(data)
    batch = _Batch(model)
    report = IngestReport(source_digest=digest)

    for record in tqdm(records, desc="ccis", disable=not progress):
        if not record.control_ids:
            report.skipped.append(SkippedRecord(record_id=record.cci_id, reason="no-control-mapping"))
            continue
        mapped = {normalize_control_id(c) for c in record.control_ids}
        targets = sorted(c for c in mapped if batch.kinds.get(c) == ElementKind.Requirement)
        if not targets:
            report.skipped.append(SkippedRecord(
                record_id=record.cci_id, reason=f"mapped-controls-absent: {', '.join(sorted(mapped))}"))
            continue
        if record.cci_id in batch.kinds:
            report.skipped.append(SkippedRecord(record_id=record.cci_id, reason="already-present"))
            if batch.kinds[record.cci_id] != ElementKind.Requirement:
                continue
        else:
            batch.add_element(Element(
                id=record.cci_id,
                name=record.cci_id,
                kind=ElementKind.Requirement,
                subkind=RequirementSubkind.DerivedCybersecurity,
                layer_tags={Layer.Requirements},
                properties={"definition": record.definition} if record.definition else {},
                tags={CCI_TAG},
            ))
            report.elements_created += 1
        for target in targets:
            if target != record.cci_id and batch.link(record.cci_id, target):
                report.edges_created += 1

    logger.info("[ingest] cci: %d elements, %d edges, %d skipped",
                report.elements_created, report.edges_created, len(report.skipped))
    return model, report


# -----------------------
# QUERIES
# -----------------------
def derived_from_graph(model: Model) -> nx.DiGraph:
    """DerivedFrom edges between Requirement elements, child -> parent."""
    requirements = {e.id for e in model.iter_elements() if e.kind == ElementKind.Requirement}
    graph = nx.DiGraph()
    graph.add_nodes_from(requirements)
    graph.add_edges_from(
        (r.source, r.target) for r in model.relationships
        if r.kind == RelationshipKind.DerivedFrom and r.source in requirements
        and r.target in requirements and r.source != r.target
    )
    return graph


def requirement_stats(model: Model) -> RequirementStats:
    """total_records = requirement elements + direct DerivedFrom edges + indirect closure pairs."""
    graph = derived_from_graph(model)
    direct = graph.number_of_edges()
    reachable_pairs = sum(len(nx.descendants(graph, node)) for node in graph)
    indirect = reachable_pairs - direct
    elements = graph.number_of_nodes()
    return RequirementStats(
        requirement_elements=elements,
        direct_requirement_edges=direct,
        indirect_pairs=indirect,
        total_records=elements + direct + indirect,
    )


def requirement_table(model: Model, family: Optional[str] = None) -> List[RequirementRow]:
    graph = derived_from_graph(model)
    rows = []
    for element in model.iter_elements():
        if element.kind != ElementKind.Requirement:
            continue
        element_family = element.properties.get("family")
        if family and (element_family or "").lower() != family.lower():
            continue
        rows.append(RequirementRow(
            requirement_id=element.id,
            name=element.name,
            subkind=element.subkind,
            family=element_family,
            derived_from=sorted(graph.successors(element.id)),
        ))
    rows.sort(key=lambda r: r.requirement_id)
    return rows
