import pytest
from hypothesis import given
from hypothesis import strategies as st

from loom_main.errors import ChangeSetError, ModelInputError
from loom_main.main_agents import model_core
from loom_main.main_agents.model_store import model_digest, structurally_equal
from loom_main.main_agents.trace_engine import coverage_report
from loom_main.main_agents.twin_sim import apply_changeset, apply_delta, diff_models, fork_twin, load_changeset
from loom_main.models.models_changes import ChangeSet, FailElement, RemoveElement, SetProperty
from loom_main.stores.isb_fixture import build_isb_model
from strategies import models

_ISB = build_isb_model()
_ELEMENT_IDS = sorted(e.id for e in _ISB.iter_elements())


def test_fork_is_independent(isb_model):
    twin = fork_twin(isb_model)
    model_core.rename_element(twin, "ad-ds", "Renamed")
    assert model_core.get_element(isb_model, "ad-ds").name == "Active Directory Domain Services"


def test_domain_controller_failure(isb_model):
    base_digest = model_digest(isb_model)
    twin, report = apply_changeset(fork_twin(isb_model), [{"op": "fail_element", "id": "domain-controller"}])
    assert report.applied_ops == 1
    assert report.affected_services == ["ad-ds", "auth-services", "isb-client-app", "isb-server-app"]
    assert report.affected_requirements == []
    assert model_digest(isb_model) == base_digest
    assert model_core.get_element(twin, "domain-controller").properties["availability"] == "failed"


def test_removing_switch_configuration_breaks_two_requirements(isb_model):
    _, report = apply_changeset(isb_model, ChangeSet(changes=[RemoveElement(id="network-switch-config")]))
    assert report.affected_requirements == ["cm-6", "cm-7"]
    assert report.affected_services == []
    removed = {(e.collection, e.id) for e in report.diff.removed}
    assert ("elements", "network-switch-config") in removed
    assert ("relationships", "satisfies:network-switch-config->cm-6") in removed


def test_failing_the_switch_isolates_every_host_service(isb_model):
    _, report = apply_changeset(isb_model, [FailElement(id="network-switch")])
    assert report.affected_requirements == ["cm-6", "cm-7"]
    assert "siem-app" in report.affected_services and "plm-app" in report.affected_services


def test_unfail_restores_coverage(isb_model):
    failed, _ = apply_changeset(isb_model, [FailElement(id="network-switch")])
    restored, report = apply_changeset(failed, [SetProperty(id="network-switch", key="availability", value=None)])
    assert report.affected_requirements == []
    assert coverage_report(restored).satisfied_ids == ["cm-6", "cm-7"]
    assert structurally_equal(restored, isb_model)


def test_empty_changeset(isb_model):
    twin, report = apply_changeset(isb_model, ChangeSet())
    assert report.applied_ops == 0 and report.diff.empty
    assert report.affected_services == [] and report.affected_requirements == []
    assert structurally_equal(twin, isb_model)


def test_invalid_op_aborts_everything(isb_model):
    before = model_digest(isb_model)
    with pytest.raises(ChangeSetError) as info:
        apply_changeset(isb_model, [
            {"op": "fail_element", "id": "app-server"},
            {"op": "add_relationship", "kind": "Satisfies", "source": "ghost", "target": "cm-6"},
        ])
    assert info.value.op_index == 1
    assert model_digest(isb_model) == before


def test_add_element_and_link_in_one_set(isb_model):
    twin, report = apply_changeset(isb_model, [
        {"op": "add_element", "element": {"id": "fw-config", "name": "Firewall", "kind": "ConfigurationItem"}},
        {"op": "add_relationship", "kind": "Satisfies", "source": "fw-config", "target": "ac-17"},
    ])
    assert "ac-17" in coverage_report(twin).satisfied_ids
    assert [(e.collection, e.id) for e in report.diff.added] == [
        ("elements", "fw-config"), ("relationships", "satisfies:fw-config->ac-17")]


def test_unknown_op_is_an_input_error(isb_model):
    with pytest.raises(ModelInputError):
        apply_changeset(isb_model, [{"op": "explode", "id": "app-server"}])


def test_load_changeset(tmp_path):
    path = tmp_path / "changes.json"
    path.write_text('{"changes": [{"op": "remove_element", "id": "network-switch-config"}]}', encoding="utf-8")
    changes = load_changeset(path)
    assert changes.changes == [RemoveElement(id="network-switch-config", mode="cascade")]


_OPS = st.one_of(
    st.builds(FailElement, id=st.sampled_from(_ELEMENT_IDS)),
    st.builds(RemoveElement, id=st.sampled_from(_ELEMENT_IDS)),
    st.builds(SetProperty, id=st.sampled_from(_ELEMENT_IDS), key=st.just("availability"), value=st.none()),
)


@given(st.lists(_OPS, max_size=4))
def test_random_changesets_keep_base_and_report_coverage_loss(ops):
    base = _ISB
    before = model_digest(base)
    try:
        twin, report = apply_changeset(base, ops)
    except ChangeSetError:
        assert model_digest(base) == before
        return
    assert model_digest(base) == before
    lost = set(coverage_report(base).satisfied_ids) - set(coverage_report(twin).satisfied_ids)
    assert report.affected_requirements == sorted(lost)
    targets = {op.id for op in ops if not isinstance(op, SetProperty)}
    assert not targets & set(report.affected_services)


class TestDiff:
    def test_identical_models(self, isb_model):
        assert diff_models(isb_model, fork_twin(isb_model)).empty

    def test_property_and_name_changes(self, isb_model):
        twin = fork_twin(isb_model)
        model_core.set_property(twin, "network-switch-config", "port_security", "disabled")
        model_core.rename_element(twin, "ad-ds", "AD DS")
        twin.model_name = "ISB twin"
        delta = diff_models(isb_model, twin)
        changed = [(c.collection, c.id, c.field, c.before, c.after) for c in delta.changed]
        assert changed == [
            ("model", "model", "model_name", "ISB", "ISB twin"),
            ("elements", "ad-ds", "name", "Active Directory Domain Services", "AD DS"),
            ("elements", "network-switch-config", "properties.port_security", "enabled", "disabled"),
        ]

    def test_diff_is_symmetric(self, isb_model):
        twin, _ = apply_changeset(isb_model, [RemoveElement(id="siem-app")])
        forward, backward = diff_models(isb_model, twin), diff_models(twin, isb_model)
        assert forward.removed == backward.added
        assert forward.added == backward.removed
        assert [(c.id, c.field) for c in forward.changed] == [(c.id, c.field) for c in backward.changed]

    def test_apply_delta_reproduces_twin(self, isb_model):
        twin, report = apply_changeset(isb_model, [
            RemoveElement(id="network-switch"),
            SetProperty(id="app-server", key="os", value="Windows Server 2025"),
            FailElement(id="domain-controller"),
        ])
        assert structurally_equal(apply_delta(isb_model, report.diff), twin)


@given(models(max_elements=10, max_relationships=12), models(max_elements=10, max_relationships=12))
def test_apply_delta_between_random_models(a, b):
    assert structurally_equal(apply_delta(a, diff_models(a, b)), b)
