# loom_main/main_agents/digital_thread.py
"""Observed-state translator: bind external snapshots to declared hardware and report drift."""
from __future__ import annotations

import logging
from collections import Counter
from typing import Dict, List, Optional, Tuple, Union

from pydantic import ValidationError

from loom_main.config import MATCH_KEY_PROPERTY, RESERVED_PROPERTY_KEYS
from loom_main.errors import AmbiguityError, ModelInputError
from loom_main.main_agents.model_core import ModelIndex
from loom_main.main_agents.model_store import PathLike, parse_json, read_text
from loom_main.models.models_graph import HARDWARE_KINDS, Element, ElementKind, Model, RelationshipKind
from loom_main.models.models_observed import (
    Binding,
    BindingResult,
    DriftReport,
    ItemKind,
    ObservedItem,
    ObservedSnapshot,
    SettingFinding,
    SourceTool,
    UnexpectedSetting,
)

logger = logging.getLogger(__name__)

_UNSET = object()


# -----------------------
# SNAPSHOT DOCUMENTS
# -----------------------
def snapshot_from_dict(data) -> ObservedSnapshot:
    try:
        return ObservedSnapshot.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ModelInputError(f"invalid snapshot at {where}: {first['msg']}") from None


def load_snapshot(source: PathLike) -> ObservedSnapshot:
    return snapshot_from_dict(parse_json(read_text(source), "snapshot"))


def _item_sort_key(item: ObservedItem):
    return (item.match_key, item.item_kind.value, item.name)


# -----------------------
# DECLARED STATE
# -----------------------
def declared_hosts(index: ModelIndex) -> Dict[str, str]:
    """match_key -> element id for hardware carrying a match_key property."""
    hosts: Dict[str, str] = {}
    for element_id in sorted(index.elements):
        element = index.elements[element_id]
        key = element.properties.get(MATCH_KEY_PROPERTY)
        if element.kind not in HARDWARE_KINDS or not key:
            continue
        if key in hosts:
            raise AmbiguityError(key, hosts[key], element_id)
        hosts[key] = element_id
    return hosts


def declared_settings(host: Element) -> List[Tuple[str, str, str]]:
    """(configuration id, setting, value) for every configuration sub-element of host."""
    settings = []
    for part in host.walk():
        if part is host or part.kind != ElementKind.ConfigurationItem:
            continue
        for key in sorted(part.properties):
            if key not in RESERVED_PROPERTY_KEYS:
                settings.append((part.id, key, part.properties[key]))
    settings.sort()
    return settings


def observed_setting_names(host: Element) -> List[Tuple[str, str, str, str]]:
    """(observed name, configuration id, setting, value) for host, observed names unique per host.

    A setting declared by a single configuration item is observed under its own name. When
    several items on one host declare the same setting, each is observed as
    ``<configuration id>.<setting>``; a name that still clashes gets a ``#n`` suffix.
    """
    settings = declared_settings(host)
    shared = Counter(setting for _, setting, _ in settings)
    wanted = [(setting if shared[setting] == 1 else f"{config_id}.{setting}", config_id, setting, value)
              for config_id, setting, value in settings]
    counts = Counter(name for name, *_ in wanted)
    taken = {name for name, count in counts.items() if count == 1}
    named = []
    for name, config_id, setting, value in wanted:
        if counts[name] > 1:
            n = 1
            while f"{name}#{n}" in taken or f"{name}#{n}" in counts:
                n += 1
            name = f"{name}#{n}"
            taken.add(name)
        named.append((name, config_id, setting, value))
    return named


# -----------------------
# PUBLIC API
# -----------------------
def bind_observed(model: Model, snapshot: ObservedSnapshot) -> BindingResult:
    index = ModelIndex(model)
    hosts = declared_hosts(index)
    observed_keys = {item.match_key for item in snapshot.items}
    bound = [Binding(element_id=element_id, match_key=key)
             for key, element_id in hosts.items() if key in observed_keys]
    bound.sort(key=lambda b: b.element_id)
    unbound = sorted((item for item in snapshot.items if item.match_key not in hosts), key=_item_sort_key)
    return BindingResult(bound=bound, unbound=unbound)


def drift_report(model: Model, snapshot: ObservedSnapshot) -> DriftReport:
    """Compare declared configuration settings against observed ConfigurationSetting items."""
    index = ModelIndex(model)
    binding = bind_observed(model, snapshot)
    hosts = declared_hosts(index)
    observed_keys = {item.match_key for item in snapshot.items}
    observed: Dict[Tuple[str, str], Optional[str]] = {
        (item.match_key, item.name): item.attributes.get("value")
        for item in snapshot.items if item.item_kind == ItemKind.ConfigurationSetting
    }

    report = DriftReport(captured_at=snapshot.captured_at, bound=binding.bound, unbound=binding.unbound)
    for key, host_id in sorted(hosts.items(), key=lambda kv: kv[1]):
        if key not in observed_keys:
            report.absent_nodes.append(host_id)
        declared_names = set()
        for name, config_id, setting, value in observed_setting_names(index.elements[host_id]):
            declared_names.add(name)
            seen = observed.get((key, name), _UNSET)
            finding = SettingFinding(element_id=config_id, attribute=setting, match_key=key, declared=value)
            if seen is _UNSET:
                report.missing_declared.append(finding)
            elif seen != value:
                finding.observed = seen
                report.value_mismatches.append(finding)
        for (observed_key, setting), value in sorted(observed.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            if observed_key == key and setting not in declared_names:
                report.unexpected_observed.append(
                    UnexpectedSetting(match_key=key, attribute=setting, observed=value, element_id=host_id))

    for item in binding.unbound:
        if item.item_kind == ItemKind.ConfigurationSetting:
            report.unexpected_observed.append(
                UnexpectedSetting(match_key=item.match_key, attribute=item.name, observed=item.attributes.get("value")))

    report.findings = sorted((item for item in snapshot.items
                              if item.item_kind == ItemKind.Finding and item.match_key in hosts), key=_item_sort_key)

    drifted = {f.element_id for f in report.missing_declared + report.value_mismatches}
    report.impacted_requirements = sorted({
        rel.target for rel in index.relationships.values()
        if rel.kind == RelationshipKind.Satisfies and rel.source in drifted and rel.target in index.elements
    })
    if report.has_drift:
        logger.warning("[drift] %d findings, %d requirements impacted",
                       report.finding_count, len(report.impacted_requirements))
    return report


def export_snapshot(model: Model, captured_at: str = "") -> ObservedSnapshot:
    """Observed snapshot generated verbatim from declared state; drift against it is empty."""
    index = ModelIndex(model)
    items: List[ObservedItem] = []
    source = {"source": SourceTool.monitoring.value}
    for key, host_id in sorted(declared_hosts(index).items()):
        host = index.elements[host_id]
        items.append(ObservedItem(match_key=key, item_kind=ItemKind.Node, name=host.name, attributes=dict(source)))
        for name, _config_id, _setting, value in observed_setting_names(host):
            items.append(ObservedItem(match_key=key, item_kind=ItemKind.ConfigurationSetting, name=name,
                                      attributes={**source, "value": value}))
    return ObservedSnapshot(captured_at=captured_at, items=items)


def evidence_entry(evidence_ref: str, snapshot_digest: str) -> str:
    return f"{evidence_ref} (snapshot sha256:{snapshot_digest})"


def attach_evidence(model: Model, subject_id: str, evidence_ref: str, snapshot_digest: str) -> Model:
    if not evidence_ref:
        raise ModelInputError("evidence_ref must be non-empty")
    subject = ModelIndex(model).get(subject_id)
    entry = evidence_entry(evidence_ref, snapshot_digest)
    if entry not in subject.documentation:
        subject.documentation.append(entry)
        logger.info("[evidence] %s <- %s", subject_id, evidence_ref)
    return model
