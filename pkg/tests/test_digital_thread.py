import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loom_main.errors import AmbiguityError, ModelInputError, NotFoundError
from loom_main.main_agents import model_core
from loom_main.main_agents.digital_thread import (
    attach_evidence,
    bind_observed,
    drift_report,
    export_snapshot,
    load_snapshot,
    snapshot_from_dict,
)
from loom_main.main_agents.model_store import dumps_canonical, model_digest
from loom_main.models.models_observed import ItemKind, ObservedItem, ObservedSnapshot
from loom_main.stores.isb_fixture import build_isb_model
from strategies import deployed_models

_ISB = build_isb_model()
_SETTINGS = [
    (item.match_key, item.name)
    for item in export_snapshot(_ISB).items if item.item_kind == ItemKind.ConfigurationSetting
]


def _with_items(snapshot, *items):
    return ObservedSnapshot(captured_at=snapshot.captured_at, items=list(snapshot.items) + list(items))


def _setting(match_key, name, value, source="monitoring"):
    return ObservedItem(match_key=match_key, item_kind=ItemKind.ConfigurationSetting, name=name,
                        attributes={"source": source, "value": value})


def test_fixture_declares_five_settings():
    assert sorted(_SETTINGS) == [
        ("isb-app01", "audit_logon_events"),
        ("isb-dc01", "audit_logon_events"),
        ("isb-sec01", "audit_logon_events"),
        ("isb-sw01", "port_security"),
        ("isb-sw01", "unused_ports"),
    ]


def test_self_snapshot_is_a_fixed_point(isb_model):
    snapshot = export_snapshot(isb_model, captured_at="2024-06-01T00:00:00Z")
    report = drift_report(isb_model, snapshot)
    assert not report.has_drift
    assert report.missing_declared == [] and report.value_mismatches == [] and report.unexpected_observed == []
    assert report.absent_nodes == [] and report.unbound == []
    assert len(report.bound) == 5


def test_binding_by_match_key(isb_model):
    snapshot = snapshot_from_dict({"captured_at": "t", "items": [
        {"match_key": "isb-dc01", "item_kind": "Node", "name": "DC01", "attributes": {"source": "monitoring"}},
        {"match_key": "rogue-01", "item_kind": "Node", "name": "?", "attributes": {"source": "siem"}},
    ]})
    result = bind_observed(isb_model, snapshot)
    assert [(b.element_id, b.match_key) for b in result.bound] == [("domain-controller", "isb-dc01")]
    assert [i.match_key for i in result.unbound] == ["rogue-01"]


def test_switch_mismatch_impacts_configuration_requirements(isb_model):
    snapshot = export_snapshot(isb_model)
    items = [i for i in snapshot.items if not (i.match_key == "isb-sw01" and i.name == "port_security")]
    items.append(_setting("isb-sw01", "port_security", "disabled"))
    report = drift_report(isb_model, ObservedSnapshot(captured_at="", items=items))
    assert report.finding_count == 1
    mismatch = report.value_mismatches[0]
    assert (mismatch.element_id, mismatch.attribute, mismatch.declared, mismatch.observed) == (
        "network-switch-config", "port_security", "enabled", "disabled")
    assert report.impacted_requirements == ["cm-6", "cm-7"]


def test_missing_and_unexpected(isb_model):
    snapshot = export_snapshot(isb_model)
    items = [i for i in snapshot.items if not (i.match_key == "isb-dc01" and i.item_kind == ItemKind.ConfigurationSetting)]
    items.append(_setting("isb-dc01", "smb1", "enabled"))
    report = drift_report(isb_model, ObservedSnapshot(captured_at="", items=items))
    assert [(f.element_id, f.attribute) for f in report.missing_declared] == [
        ("domain-controller.audit-policy", "audit_logon_events")]
    assert [(u.match_key, u.attribute, u.element_id) for u in report.unexpected_observed] == [
        ("isb-dc01", "smb1", "domain-controller")]
    assert report.impacted_requirements == []


def test_absent_nodes_and_security_findings_are_notices(isb_model):
    snapshot = export_snapshot(isb_model)
    items = [i for i in snapshot.items if i.match_key != "isb-ws01"]
    items.append(ObservedItem(match_key="isb-sec01", item_kind=ItemKind.Finding, name="CVE-2024-0001",
                              attributes={"source": "vuln_scanner", "severity": "high"}))
    report = drift_report(isb_model, ObservedSnapshot(captured_at="", items=items))
    assert not report.has_drift
    assert report.absent_nodes == ["windows-workstation"]
    assert [f.name for f in report.findings] == ["CVE-2024-0001"]


def test_settings_on_unbound_hosts_are_unexpected(isb_model):
    snapshot = _with_items(export_snapshot(isb_model), _setting("rogue-01", "telnet", "enabled"))
    report = drift_report(isb_model, snapshot)
    assert [(u.match_key, u.element_id) for u in report.unexpected_observed] == [("rogue-01", None)]


def test_duplicate_match_key_is_ambiguous(isb_model):
    model_core.set_property(isb_model, "security-server", "match_key", "isb-dc01")
    with pytest.raises(AmbiguityError) as info:
        drift_report(isb_model, export_snapshot(build_isb_model()))
    assert set(info.value.element_ids) == {"domain-controller", "security-server"}


def test_unknown_source_tool_is_rejected():
    with pytest.raises(ModelInputError):
        snapshot_from_dict({"captured_at": "t", "items": [
            {"match_key": "a", "item_kind": "Node", "name": "a", "attributes": {"source": "spreadsheet"}}]})


def test_duplicate_observed_items_are_rejected():
    item = {"match_key": "a", "item_kind": "Node", "name": "a", "attributes": {"source": "siem"}}
    with pytest.raises(ModelInputError):
        snapshot_from_dict({"captured_at": "t", "items": [item, item]})


def test_snapshot_file_round_trip(tmp_path, isb_model):
    snapshot = export_snapshot(isb_model, captured_at="2024-06-01")
    path = tmp_path / "snap.json"
    path.write_text(dumps_canonical(snapshot), encoding="utf-8")
    assert load_snapshot(path) == snapshot


@given(st.sets(st.sampled_from(range(len(_SETTINGS)))))
def test_perturbed_settings_yield_exactly_k_findings(chosen):
    model = _ISB
    perturbed = {_SETTINGS[i] for i in chosen}
    items = []
    for item in export_snapshot(model).items:
        if (item.match_key, item.name) in perturbed and item.item_kind == ItemKind.ConfigurationSetting:
            item = _setting(item.match_key, item.name, item.attributes["value"] + "-drifted")
        items.append(item)
    report = drift_report(model, ObservedSnapshot(captured_at="", items=items))
    assert report.finding_count == len(chosen)
    assert {(f.match_key, f.attribute) for f in report.value_mismatches} == perturbed


def test_attach_evidence_is_idempotent(isb_model):
    attach_evidence(isb_model, "network-switch-config", "reports/switch-scan.xml", "ab" * 32)
    once = model_digest(isb_model)
    attach_evidence(isb_model, "network-switch-config", "reports/switch-scan.xml", "ab" * 32)
    assert model_digest(isb_model) == once
    docs = model_core.get_element(isb_model, "network-switch-config").documentation
    assert docs == [f"reports/switch-scan.xml (snapshot sha256:{'ab' * 32})"]


def test_attach_evidence_requires_reference(isb_model):
    with pytest.raises(ModelInputError):
        attach_evidence(isb_model, "network-switch-config", "", "00")


def test_attach_evidence_to_unknown_subject(isb_model):
    with pytest.raises(NotFoundError):
        attach_evidence(isb_model, "ghost", "reports/scan.xml", "00")


def _host_with_shared_setting():
    model = model_core.create_model("shared")
    model_core.add_element(model, {
        "id": "srv", "name": "Server", "kind": "TechnologyNode", "properties": {"match_key": "h1"},
        "sub_elements": [
            {"id": "cfg-a", "name": "SSH", "kind": "ConfigurationItem", "properties": {"port": "22"}},
            {"id": "cfg-b", "name": "HTTPS", "kind": "ConfigurationItem", "properties": {"port": "443", "tls": "1.3"}},
        ],
    })
    return model


def test_setting_shared_by_two_configurations_is_observed_per_configuration():
    model = _host_with_shared_setting()
    snapshot = export_snapshot(model)
    names = sorted(i.name for i in snapshot.items if i.item_kind == ItemKind.ConfigurationSetting)
    assert names == ["cfg-a.port", "cfg-b.port", "tls"]
    assert not drift_report(model, snapshot).has_drift

    items = [i for i in snapshot.items if i.name != "cfg-b.port"] + [_setting("h1", "cfg-b.port", "8443")]
    report = drift_report(model, ObservedSnapshot(captured_at="", items=items))
    assert [(f.element_id, f.attribute, f.declared, f.observed) for f in report.value_mismatches] == [
        ("cfg-b", "port", "443", "8443")]
    assert report.finding_count == 1


@given(deployed_models())
def test_exported_snapshot_is_a_fixed_point_for_random_deployments(model):
    report = drift_report(model, export_snapshot(model))
    assert report.finding_count == 0
    assert report.absent_nodes == [] and report.unbound == []


@settings(max_examples=100)
@given(deployed_models(), st.data())
def test_k_perturbed_random_settings_yield_k_mismatches(model, data):
    items = export_snapshot(model).items
    settable = [i for i, item in enumerate(items) if item.item_kind == ItemKind.ConfigurationSetting]
    chosen = data.draw(st.sets(st.sampled_from(settable)) if settable else st.just(set()))
    perturbed = []
    for i, item in enumerate(items):
        if i in chosen:
            item = _setting(item.match_key, item.name, item.attributes["value"] + "~")
        perturbed.append(item)
    report = drift_report(model, ObservedSnapshot(captured_at="", items=perturbed))
    assert report.finding_count == len(chosen)
    assert len(report.value_mismatches) == len(chosen)
    assert len({(f.match_key, f.element_id, f.attribute) for f in report.value_mismatches}) == len(chosen)
    assert all(f.observed == f.declared + "~" for f in report.value_mismatches)
