import json

import pytest
from click.testing import CliRunner

from loom_main.main import cli
from loom_main.main_agents import model_core
from loom_main.main_agents.catalog_ingest import requirement_stats
from loom_main.main_agents.digital_thread import export_snapshot
from loom_main.main_agents.model_store import dumps_canonical, load_model, save_model
from loom_main.main_agents.trace_engine import coverage_report, impact_analysis
from loom_main.main_agents.view_export import layer_report
from loom_main.stores.isb_fixture import RMF_ROOT_ID


@pytest.fixture
def runner():
    return CliRunner()


def _run(runner, path, *args):
    return runner.invoke(cli, ["--model", str(path), *args])


def test_example_then_validate(runner, tmp_path):
    path = tmp_path / "isb.json"
    assert _run(runner, path, "example").exit_code == 0
    result = _run(runner, path, "validate")
    assert result.exit_code == 0, result.output


def test_example_refuses_to_overwrite(runner, isb_file):
    result = _run(runner, isb_file, "example")
    assert result.exit_code == 2
    assert _run(runner, isb_file, "example", "--force").exit_code == 0


def test_coverage_table(runner, isb_file):
    result = _run(runner, isb_file, "coverage")
    assert result.exit_code == 0
    assert "2 of 13 requirements satisfied" in result.stdout


@pytest.mark.parametrize("args, direct", [
    (["coverage"], lambda m: coverage_report(m)),
    (["impact", "domain-controller"], lambda m: impact_analysis(m, "domain-controller")),
    (["stats"], lambda m: requirement_stats(m)),
    (["layer-report", "--layer", "Technology"], lambda m: layer_report(m, "Technology")),
    (["export-snapshot", "--captured-at", "t0"], lambda m: export_snapshot(m, "t0")),
])
def test_structured_output_matches_direct_call(runner, isb_file, args, direct):
    result = runner.invoke(cli, ["--model", str(isb_file), "--format", "structured", *args])
    assert result.exit_code == 0, result.output
    assert result.stdout == dumps_canonical(direct(load_model(isb_file)))


def test_trace_matches_golden(runner, isb_file, golden_dir):
    result = runner.invoke(cli, ["--model", str(isb_file), "--format", "structured",
                                 "trace", "network-switch-config", "--direction", "upstream"])
    assert result.exit_code == 0
    assert result.stdout == (golden_dir / "isb_trace_switch_config_upstream.json").read_text(encoding="utf-8")


def test_view_render_matches_golden(runner, isb_file, golden_dir):
    result = _run(runner, isb_file, "view-render", "conceptual-strategic")
    assert result.exit_code == 0
    assert result.stdout == (golden_dir / "conceptual_strategic.dot").read_text(encoding="utf-8")


def test_drift_fixed_point_and_perturbation(runner, isb_file, tmp_path):
    snapshot_path = tmp_path / "snapshot.json"
    assert _run(runner, isb_file, "--output", str(snapshot_path), "export-snapshot").exit_code == 0
    assert _run(runner, isb_file, "drift", str(snapshot_path)).exit_code == 0

    data = json.loads(snapshot_path.read_text(encoding="utf-8"))
    for item in data["items"]:
        if item["match_key"] == "isb-sw01" and item["name"] == "unused_ports":
            item["attributes"]["value"] = "enabled"
    snapshot_path.write_text(json.dumps(data), encoding="utf-8")
    result = runner.invoke(cli, ["--model", str(isb_file), "--format", "structured", "drift", str(snapshot_path)])
    assert result.exit_code == 1
    assert json.loads(result.stdout)["impacted_requirements"] == ["cm-6", "cm-7"]


def test_validate_reports_findings(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text(json.dumps({
        "model_name": "broken",
        "elements": [{"id": "a", "name": "A", "kind": "Service"}],
        "relationships": [{"id": "x", "kind": "Satisfies", "source": "a", "target": "ghost"}],
    }), encoding="utf-8")
    result = runner.invoke(cli, ["--model", str(path), "--format", "structured", "validate"])
    assert result.exit_code == 1
    assert [f["code"] for f in json.loads(result.stdout)] == ["dangling-reference"]


def test_orphans_exit_one_on_fixture(runner, isb_file):
    assert _run(runner, isb_file, "orphans").exit_code == 1


def test_input_errors_exit_two(runner, isb_file, tmp_path):
    result = _run(runner, isb_file, "trace", "ghost")
    assert result.exit_code == 2
    assert "ghost" in result.output
    assert runner.invoke(cli, ["validate"], env={"LOOM_MODEL": ""}).exit_code == 2
    assert _run(runner, isb_file, "no-such-command").exit_code == 2
    assert _run(runner, tmp_path / "missing.json", "validate").exit_code == 2


def test_model_path_from_environment(runner, isb_file):
    result = runner.invoke(cli, ["validate"], env={"LOOM_MODEL": str(isb_file)})
    assert result.exit_code == 0


def test_authoring_round(runner, tmp_path):
    path = tmp_path / "m.json"
    assert _run(runner, path, "init", "Enclave").exit_code == 0
    assert _run(runner, path, "add-element", "--id", "host", "--name", "Host", "--kind", "TechnologyNode",
                "--layer", "Technology", "--property", "match_key=h01").exit_code == 0
    assert _run(runner, path, "add-element", "--id", "svc", "--name", "Service", "--kind", "Service").exit_code == 0
    assert _run(runner, path, "link", "Contains", "host", "svc").exit_code == 0
    assert _run(runner, path, "link", "Contains", "host", "svc").exit_code == 2
    assert _run(runner, path, "view-create", "Hosts", "--layer", "Technology", "--member", "host").exit_code == 0

    model = load_model(path)
    assert model_core.get_element(model, "host").properties == {"match_key": "h01"}
    assert [v.id for v in model.views] == ["hosts"]
    assert _run(runner, path, "remove-element", "svc").exit_code == 2
    assert _run(runner, path, "remove-element", "svc", "--cascade").exit_code == 0
    assert [e.id for e in load_model(path).elements] == ["host"]


def test_ingest_commands(runner, tmp_path, rmf_model, data_dir):
    path = save_model(rmf_model, tmp_path / "rmf.json")
    result = runner.invoke(cli, ["--model", str(path), "--format", "structured",
                                 "ingest-catalog", str(data_dir / "mini_catalog.json"), "--rmf-root", RMF_ROOT_ID])
    assert result.exit_code == 0
    assert json.loads(result.stdout)["elements_created"] == 6
    assert _run(runner, path, "ingest-cci", str(data_dir / "mini_cci_list.json")).exit_code == 0
    stats = runner.invoke(cli, ["--model", str(path), "--format", "structured", "stats"])
    assert json.loads(stats.stdout)["total_records"] == 29


def test_simulate_and_diff(runner, isb_file, tmp_path):
    changes = tmp_path / "changes.json"
    changes.write_text(json.dumps({"changes": [{"op": "fail_element", "id": "domain-controller"}]}), encoding="utf-8")
    twin_path = tmp_path / "twin.json"
    result = runner.invoke(cli, ["--model", str(isb_file), "--format", "structured",
                                 "simulate", str(changes), "--save-twin", str(twin_path)])
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert report["affected_services"] == ["ad-ds", "auth-services", "isb-client-app", "isb-server-app"]

    diff = runner.invoke(cli, ["--model", str(isb_file), "--format", "structured", "diff", str(twin_path)])
    assert diff.exit_code == 0
    changed = json.loads(diff.stdout)["changed"]
    assert [(c["id"], c["field"], c["after"]) for c in changed] == [
        ("domain-controller", "properties.availability", "failed")]


def test_simulate_rejects_bad_changeset(runner, isb_file, tmp_path):
    changes = tmp_path / "changes.json"
    changes.write_text('[{"op": "remove_element", "id": "nope"}]', encoding="utf-8")
    result = _run(runner, isb_file, "simulate", str(changes))
    assert result.exit_code == 2
    assert "change #0" in result.output


def test_evidence_and_usage(runner, isb_file, tmp_path):
    snapshot = tmp_path / "snap.json"
    _run(runner, isb_file, "--output", str(snapshot), "export-snapshot")
    assert _run(runner, isb_file, "evidence", "--subject", "network-switch-config",
                "--ref", "scans/switch.xml", "--snapshot", str(snapshot)).exit_code == 0
    listing = runner.invoke(cli, ["--model", str(isb_file), "--format", "structured", "evidence"])
    entries = json.loads(listing.stdout)
    assert [e["requirement_id"] for e in entries] == ["cm-6", "cm-7"]

    usage = runner.invoke(cli, ["--model", str(isb_file), "--format", "structured", "usage", "auth-services"])
    assert json.loads(usage.stdout)["views"] == ["auth-logging-application"]


def test_assign_stereotype_and_requirements_table(runner, isb_file):
    model = load_model(isb_file)
    model_core.add_element(model, {"id": "web-server", "name": "Web", "kind": "TechnologyNode"})
    save_model(model, isb_file)
    assert _run(runner, isb_file, "assign-stereotype", "web-server", "windows-server-baseline").exit_code == 0
    assert model_core.get_element(load_model(isb_file), "web-server.audit-policy")
    table = runner.invoke(cli, ["--model", str(isb_file), "--format", "structured", "requirements-table",
                                "--family", "ac"])
    assert [r["requirement_id"] for r in json.loads(table.stdout)] == ["ac-17", "ac-2", "ac-2.1"]


def test_table_output_is_plain_text(runner, isb_file):
    model = load_model(isb_file)
    model_core.rename_element(model, "network-switch", "[red]Core Switch[/red]")
    save_model(model, isb_file)
    result = _run(runner, isb_file, "layer-report", "--layer", "Technology")
    assert result.exit_code == 0
    lines = result.stdout.splitlines()
    assert lines[0].split() == ["element", "kind", "sub_elements", "name"]
    assert "\x1b" not in result.stdout
    row = next(line for line in lines if line.startswith("network-switch "))
    assert row.split()[:3] == ["network-switch", "NetworkDevice", "1"]
    assert row.rstrip().endswith("[red]Core Switch[/red]")
