# loom_main/main_agents/twin_sim.py
"""What-if evaluation on forked model copies.

Failure is structural: a failed element (availability=failed) and its
sub-elements stop satisfying requirements and stop carrying dependencies,
but stay in the graph.
"""
from __future__ import annotations

import copy
import logging
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx
from pydantic import ValidationError

from loom_main.config import AVAILABILITY_PROPERTY, FAILED
from loom_main.errors import ChangeSetError, LoomError, ModelInputError
from loom_main.main_agents import model_core
from loom_main.main_agents.model_core import ModelIndex
from loom_main.main_agents.model_store import PathLike, canonical_dict, model_from_dict, parse_json, read_text
from loom_main.main_agents.trace_engine import coverage_report, down_elements
from loom_main.models.models_changes import (
    AddElement,
    AddRelationship,
    ChangeSet,
    DeltaEntry,
    FailElement,
    FieldChange,
    ModelDelta,
    RemoveElement,
    RemoveRelationship,
    SetProperty,
    SimulationReport,
)
from loom_main.models.models_graph import ElementKind, Model, RelationshipKind

logger = logging.getLogger(__name__)

DEPENDENT_KINDS = frozenset({ElementKind.Service, ElementKind.ApplicationComponent})


# -----------------------
# CHANGE SETS
# -----------------------
def changeset_from_data(data: Any) -> ChangeSet:
    if isinstance(data, list):
        data = {"changes": data}
    try:
        return ChangeSet.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ModelInputError(f"invalid change set at {where}: {first['msg']}") from None


def load_changeset(source: PathLike) -> ChangeSet:
    return changeset_from_data(parse_json(read_text(source), "change set"))


def _apply_op(model: Model, op) -> None:
    if isinstance(op, RemoveElement):
        model_core.remove_element(model, op.id, op.mode)
    elif isinstance(op, AddElement):
        model_core.add_element(model, op.element)
    elif isinstance(op, AddRelationship):
        model_core.add_relationship(model, op.kind, op.source, op.target, note=op.note)
    elif isinstance(op, RemoveRelationship):
        model_core.remove_relationship(model, op.id)
    elif isinstance(op, SetProperty):
        model_core.set_property(model, op.id, op.key, op.value)
    elif isinstance(op, FailElement):
        model_core.set_property(model, op.id, AVAILABILITY_PROPERTY, FAILED)
    else:
        raise ModelInputError(f"unsupported change {op!r}")


# -----------------------
# DEPENDENCIES
# -----------------------
def dependency_graph(model: Model) -> nx.DiGraph:
    """consumer -> provider edges among available elements.

    P Supports X, X ConnectsTo P, X ExchangesWith P and P Contains X all make X depend on P.
    """
    index = ModelIndex(model)
    down = down_elements(index)
    graph = nx.DiGraph()
    graph.add_nodes_from(sorted(set(index.elements) - down))
    for rel in index.relationships.values():
        if rel.kind in (RelationshipKind.Supports, RelationshipKind.Contains):
            consumer, provider = rel.target, rel.source
        elif rel.kind in (RelationshipKind.ConnectsTo, RelationshipKind.ExchangesWith):
            consumer, provider = rel.source, rel.target
        else:
            continue
        if consumer in graph and provider in graph and consumer != provider:
            graph.add_edge(consumer, provider)
    return graph


def affected_services(before: Model, after: Model, targets: Set[str] = frozenset()) -> List[str]:
    """Services and application components that lost a provider they could reach before."""
    g_before, g_after = dependency_graph(before), dependency_graph(after)
    index_before, index_after = ModelIndex(before), ModelIndex(after)
    affected = []
    for element_id in sorted(index_after.elements):
        if element_id in targets or element_id not in index_before.elements:
            continue
        if index_after.elements[element_id].kind not in DEPENDENT_KINDS:
            continue
        reach_before = nx.descendants(g_before, element_id) if element_id in g_before else set()
        reach_after = nx.descendants(g_after, element_id) if element_id in g_after else set()
        if reach_before - reach_after:
            affected.append(element_id)
    return affected


# -----------------------
# PUBLIC API
# -----------------------
def fork_twin(model: Model) -> Model:
    return model.model_copy(deep=True)


def apply_changeset(twin: Model, changes: Union[ChangeSet, Sequence, Dict]) -> Tuple[Model, SimulationReport]:
    """Apply every op to a copy of twin; any rejected op aborts the whole set."""
    if not isinstance(changes, ChangeSet):
        changes = changeset_from_data(changes)
    work = fork_twin(twin)
    targets: Set[str] = set()
    for position, op in enumerate(changes.changes):
        try:
            _apply_op(work, op)
        except LoomError as exc:
            logger.warning("[twin] change set aborted at #%d: %s", position, exc)
            raise ChangeSetError(position, str(exc)) from exc
        if isinstance(op, (RemoveElement, FailElement)):
            targets.add(op.id)

    satisfied_before = set(coverage_report(twin).satisfied_ids)
    satisfied_after = set(coverage_report(work).satisfied_ids)
    report = SimulationReport(
        applied_ops=len(changes.changes),
        affected_services=affected_services(twin, work, targets),
        affected_requirements=sorted(satisfied_before - satisfied_after),
        diff=diff_models(twin, work),
    )
    logger.info("[twin] %d ops: %d services, %d requirements affected",
                report.applied_ops, len(report.affected_services), len(report.affected_requirements))
    return work, report


# -----------------------
# DIFF
# -----------------------
_COLLECTIONS = ("elements", "relationships", "stereotypes", "views")
_PROPERTY_PREFIX = "properties."


def _flatten(model: Model) -> Tuple[Dict[str, Any], Dict[str, Dict[str, Dict[str, Any]]]]:
    data = canonical_dict(model)
    elements: Dict[str, Dict[str, Any]] = {}

    def _walk(record: Dict[str, Any], parent: Optional[str]) -> None:
        flat = dict(record)
        subs = flat.pop("sub_elements")
        flat["parent"] = parent
        elements[flat["id"]] = flat
        for sub in subs:
            _walk(sub, flat["id"])

    for record in data["elements"]:
        _walk(record, None)
    flat = {
        "elements": elements,
        "relationships": {r["id"]: r for r in data["relationships"]},
        "stereotypes": {s["name"]: s for s in data["stereotypes"]},
        "views": {v["id"]: v for v in data["views"]},
    }
    header = {"model_name": data["model_name"], "schema_version": data["schema_version"]}
    return header, flat


def _record_changes(collection: str, record_id: str, a: Dict[str, Any], b: Dict[str, Any]) -> List[FieldChange]:
    changes = []
    for field in sorted(set(a) | set(b)):
        before, after = a.get(field), b.get(field)
        if field == "properties" and collection == "elements":
            before, after = before or {}, after or {}
            for key in sorted(set(before) | set(after)):
                if before.get(key) != after.get(key):
                    changes.append(FieldChange(collection=collection, id=record_id, field=_PROPERTY_PREFIX + key,
                                               before=before.get(key), after=after.get(key)))
        elif before != after:
            changes.append(FieldChange(collection=collection, id=record_id, field=field, before=before, after=after))
    return changes


def diff_models(base: Model, twin: Model) -> ModelDelta:
    """Complete, deterministic delta; diff(b, a) mirrors diff(a, b)."""
    head_a, flat_a = _flatten(base)
    head_b, flat_b = _flatten(twin)
    delta = ModelDelta()
    for field in sorted(head_a):
        if head_a[field] != head_b[field]:
            delta.changed.append(FieldChange(collection="model", id="model", field=field,
                                             before=head_a[field], after=head_b[field]))
    for collection in _COLLECTIONS:
        a, b = flat_a[collection], flat_b[collection]
        for record_id in sorted(set(b) - set(a)):
            delta.added.append(DeltaEntry(collection=collection, id=record_id, record=b[record_id]))
        for record_id in sorted(set(a) - set(b)):
            delta.removed.append(DeltaEntry(collection=collection, id=record_id, record=a[record_id]))
        for record_id in sorted(set(a) & set(b)):
            delta.changed.extend(_record_changes(collection, record_id, a[record_id], b[record_id]))
    return delta


def _nest(elements: Dict[str, Dict[str, Any]]) -> List[Dict[str, Any]]:
    children: Dict[Optional[str], List[Dict[str, Any]]] = {}
    for record in elements.values():
        children.setdefault(record.get("parent"), []).append(record)

    def _build(record: Dict[str, Any]) -> Dict[str, Any]:
        nested = {k: v for k, v in record.items() if k != "parent"}
        nested["sub_elements"] = [_build(c) for c in sorted(children.get(record["id"], []), key=lambda c: c["id"])]
        return nested

    return [_build(r) for r in sorted(children.get(None, []), key=lambda r: r["id"])]


def apply_delta(base: Model, delta: ModelDelta) -> Model:
    """Replay a delta onto base; apply_delta(a, diff_models(a, b)) reproduces b."""
    header, flat = _flatten(base)
    flat = copy.deepcopy(flat)
    for entry in delta.removed:
        flat[entry.collection].pop(entry.id, None)
    for entry in delta.added:
        flat[entry.collection][entry.id] = copy.deepcopy(entry.record)
    for change in delta.changed:
        if change.collection == "model":
            header[change.field] = change.after
            continue
        record = flat[change.collection][change.id]
        if change.collection == "elements" and change.field.startswith(_PROPERTY_PREFIX):
            key = change.field[len(_PROPERTY_PREFIX):]
            properties = record.setdefault("properties", {})
            if change.after is None:
                properties.pop(key, None)
            else:
                properties[key] = change.after
        else:
            record[change.field] = copy.deepcopy(change.after)
    return model_from_dict({
        **header,
        "elements": _nest(flat["elements"]),
        "relationships": list(flat["relationships"].values()),
        "stereotypes": list(flat["stereotypes"].values()),
        "views": list(flat["views"].values()),
    })
