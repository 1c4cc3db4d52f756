# loom_main/main.py
"""loom: command-line entry point over the model engine.

Exit status: 0 success / no findings, 1 findings (validate, drift, orphans),
2 usage or input error.
"""
from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Any, Callable, Iterable, List, Literal, Optional, Sequence

import click
from pydantic import BaseModel, ConfigDict
from rich import box
from rich.console import Console
from rich.table import Table
from rich.text import Text

from loom_main.config import DEFAULT_FORMAT, DEFAULT_MODEL_PATH, LOG_LEVEL
from loom_main.errors import LoomError, ModelInputError
from loom_main.main_agents import model_core
from loom_main.main_agents.catalog_ingest import (
    ingest_cci_list,
    ingest_oscal_catalog,
    requirement_stats,
    requirement_table,
)
from loom_main.main_agents.digital_thread import attach_evidence, drift_report, export_snapshot, load_snapshot
from loom_main.main_agents.model_store import digest_text, dumps_canonical, load_model, read_text, save_model
from loom_main.main_agents.trace_engine import (
    coverage_report,
    evidence_index,
    find_orphans,
    impact_analysis,
    match_requirements,
    trace,
)
from loom_main.main_agents.twin_sim import apply_changeset, diff_models, fork_twin, load_changeset
from loom_main.main_agents.view_export import RENDER_FORMATS, create_view, layer_report, render_view
from loom_main.models.models_graph import ElementKind, Layer, Model, RelationshipKind, RequirementSubkind
from loom_main.stores.isb_fixture import build_isb_model

# wide enough that tables never wrap; columns still size to their content
_TABLE_WIDTH = 400


# -----------------------
# CONFIG
# -----------------------
class CliConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model_path: Optional[Path] = None
    output_format: Literal["table", "structured"] = "table"
    output: Optional[Path] = None
    verbosity: int = 0

    def require_model_path(self) -> Path:
        if self.model_path is None:
            raise click.UsageError("no model file: pass --model or set LOOM_MODEL")
        return self.model_path

    def load(self) -> Model:
        return load_model(self.require_model_path())

    def save(self, model: Model) -> None:
        save_model(model, self.require_model_path())

    @property
    def structured(self) -> bool:
        return self.output_format == "structured"


def _configure_logging(verbosity: int) -> None:
    if verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = logging.INFO
    else:
        level = getattr(logging, LOG_LEVEL.upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s %(message)s", stream=sys.stderr)


# -----------------------
# OUTPUT
# -----------------------
def _to_data(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, (list, tuple)):
        return [_to_data(o) for o in obj]
    return obj


def _table(headers: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    table = Table(box=box.SIMPLE_HEAD, show_edge=False, pad_edge=False)
    for header in headers:
        table.add_column(header, justify="left", no_wrap=True)
    for row in rows:
        table.add_row(*(Text("" if c is None else str(c)) for c in row))
    console = Console(width=_TABLE_WIDTH, color_system=None, highlight=False, emoji=False)
    with console.capture() as capture:
        console.print(table)
    return capture.get()


def _write(cfg: CliConfig, text: str) -> None:
    if cfg.output is not None:
        with open(cfg.output, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        click.echo(f"✅ wrote {cfg.output}", err=True)
    else:
        click.echo(text, nl=False)


def _emit(cfg: CliConfig, result: Any, table: Callable[[], str]) -> None:
    _write(cfg, dumps_canonical(_to_data(result)) if cfg.structured else table())


def _status(message: str) -> None:
    click.echo(f"✅ {message}", err=True)


def _parse_pairs(pairs: Sequence[str], what: str) -> dict:
    parsed = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ModelInputError(f"{what} must look like key=value, got {pair!r}")
        parsed[key] = value
    return parsed


# -----------------------
# GROUP
# -----------------------
class LoomGroup(click.Group):
    """Maps engine errors to a one-line message and exit status 2."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except LoomError as exc:
            click.echo(f"❌ {exc}", err=True)
            ctx.exit(2)


@click.group(cls=LoomGroup)
@click.option("--model", "model_path", envvar="LOOM_MODEL", default=DEFAULT_MODEL_PATH or None,
              type=click.Path(dir_okay=False, path_type=Path), help="Model file (env: LOOM_MODEL).")
@click.option("--format", "output_format", type=click.Choice(["table", "structured"]),
              default=DEFAULT_FORMAT, show_default=True, help="Human table or canonical JSON.")
@click.option("--output", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write the result to a file instead of stdout.")
@click.option("-v", "--verbose", count=True, help="-v info, -vv debug.")
@click.pass_context
def cli(ctx: click.Context, model_path: Optional[Path], output_format: str, output: Optional[Path], verbose: int):
    """Digital-engineering model engine: requirements, traceability, drift and what-if simulation."""
    ctx.obj = CliConfig(model_path=model_path, output_format=output_format, output=output, verbosity=verbose)
    _configure_logging(verbose)


pass_config = click.make_pass_decorator(CliConfig)


def _fresh_destination(cfg: CliConfig, force: bool) -> Path:
    path = cfg.require_model_path()
    if path.exists() and not force:
        raise ModelInputError(f"{path} already exists (use --force to overwrite)")
    return path


# -----------------------
# AUTHORING
# -----------------------
@cli.command()
@click.argument("name")
@click.option("--force", is_flag=True, help="Overwrite an existing model file.")
@pass_config
def init(cfg: CliConfig, name: str, force: bool):
    """Create an empty model file."""
    path = _fresh_destination(cfg, force)
    save_model(model_core.create_model(name), path)
    _status(f"initialized {name} at {path}")


@cli.command()
@click.option("--force", is_flag=True, help="Overwrite an existing model file.")
@pass_config
def example(cfg: CliConfig, force: bool):
    """Write the bundled ISB reference model."""
    path = _fresh_destination(cfg, force)
    save_model(build_isb_model(), path)
    _status(f"wrote ISB example model to {path}")


@cli.command("add-element")
@click.option("--id", "element_id", required=True)
@click.option("--name", required=True)
@click.option("--kind", required=True, type=click.Choice([k.value for k in ElementKind]))
@click.option("--subkind", type=click.Choice([s.value for s in RequirementSubkind]), default=None)
@click.option("--layer", "layers", multiple=True, type=click.Choice([l.value for l in Layer]))
@click.option("--property", "properties", multiple=True, metavar="KEY=VALUE")
@click.option("--tag", "tags", multiple=True)
@pass_config
def add_element_cmd(cfg: CliConfig, element_id, name, kind, subkind, layers, properties, tags):
    """Add one element."""
    model = cfg.load()
    record = {
        "id": element_id, "name": name, "kind": kind, "subkind": subkind,
        "layer_tags": list(layers), "properties": _parse_pairs(properties, "--property"), "tags": list(tags),
    }
    model_core.add_element(model, record)
    cfg.save(model)
    _status(f"added {element_id}")


@cli.command()
@click.argument("kind", type=click.Choice([k.value for k in RelationshipKind]))
@click.argument("source")
@click.argument("target")
@click.option("--note", default=None)
@pass_config
def link(cfg: CliConfig, kind: str, source: str, target: str, note: Optional[str]):
    """Add a typed relationship SOURCE -> TARGET."""
    model = cfg.load()
    model_core.add_relationship(model, kind, source, target, note=note)
    cfg.save(model)
    _status(f"linked {source} -{kind}-> {target}")


@cli.command("remove-element")
@click.argument("element_id")
@click.option("--cascade", is_flag=True, help="Also drop incident relationships and view memberships.")
@pass_config
def remove_element_cmd(cfg: CliConfig, element_id: str, cascade: bool):
    """Remove an element and its sub-elements."""
    model = cfg.load()
    _, removed = model_core.remove_element(model, element_id, "cascade" if cascade else "refuse_if_referenced")
    cfg.save(model)
    _emit(cfg, removed, lambda: "".join(f"{r}\n" for r in removed))


@cli.command("assign-stereotype")
@click.argument("element_id")
@click.argument("stereotype")
@pass_config
def assign_stereotype_cmd(cfg: CliConfig, element_id: str, stereotype: str):
    """Apply a stereotype's defaults and baseline configuration to an element."""
    model = cfg.load()
    model_core.assign_stereotype(model, element_id, stereotype)
    cfg.save(model)
    _status(f"{stereotype} assigned to {element_id}")


@cli.command()
@click.argument("element_id")
@pass_config
def usage(cfg: CliConfig, element_id: str):
    """Views and relationships that reference an element."""
    result = model_core.element_usage(cfg.load(), element_id)
    _emit(cfg, result, lambda: _table(
        ["referrer", "type"],
        [(v, "view") for v in result.views] + [(r, "relationship") for r in result.relationships]))


@cli.command()
@pass_config
def validate(cfg: CliConfig):
    """Check model invariants; exit 1 when findings exist."""
    findings = model_core.validate_model(cfg.load())
    _emit(cfg, findings, lambda: _table(["severity", "code", "subject", "message"],
                                        [(f.severity.value, f.code, f.subject, f.message) for f in findings]))
    if findings:
        click.get_current_context().exit(1)
    _status("model is valid")


# -----------------------
# INGEST
# -----------------------
def _ingest_table(report) -> str:
    head = f"elements_created: {report.elements_created}\nedges_created: {report.edges_created}\n"
    return head + _table(["skipped", "reason"], [(s.record_id, s.reason) for s in report.skipped])


@cli.command("ingest-catalog")
@click.argument("catalog", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--rmf-root", required=True, help="Requirement every base control derives from.")
@click.option("--progress", is_flag=True, help="Show a progress bar.")
@pass_config
def ingest_catalog_cmd(cfg: CliConfig, catalog: Path, rmf_root: str, progress: bool):
    """Ingest an OSCAL 800-53 catalog as Cybersecurity requirements."""
    model = cfg.load()
    _, report = ingest_oscal_catalog(model, read_text(catalog), rmf_root, progress=progress)
    cfg.save(model)
    _emit(cfg, report, lambda: _ingest_table(report))


@cli.command("ingest-cci")
@click.argument("cci_list", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--progress", is_flag=True, help="Show a progress bar.")
@pass_config
def ingest_cci_cmd(cfg: CliConfig, cci_list: Path, progress: bool):
    """Ingest a normalized CCI list as DerivedCybersecurity requirements."""
    model = cfg.load()
    _, report = ingest_cci_list(model, read_text(cci_list), progress=progress)
    cfg.save(model)
    _emit(cfg, report, lambda: _ingest_table(report))


@cli.command()
@pass_config
def stats(cfg: CliConfig):
    """Requirement element, edge and closure counts."""
    result = requirement_stats(cfg.load())
    _emit(cfg, result, lambda: _table(["metric", "value"], result.model_dump().items()))


@cli.command("requirements-table")
@click.option("--family", default=None, help="Control family filter, e.g. ac.")
@pass_config
def requirements_table_cmd(cfg: CliConfig, family: Optional[str]):
    """Tabular listing of requirements and their parents."""
    rows = requirement_table(cfg.load(), family)
    _emit(cfg, rows, lambda: _table(
        ["id", "subkind", "name", "derived_from"],
        [(r.requirement_id, r.subkind.value if r.subkind else "", r.name, ", ".join(r.derived_from)) for r in rows]))


# -----------------------
# QUERIES
# -----------------------
@cli.command("trace")
@click.argument("origin")
@click.option("--direction", type=click.Choice(["upstream", "downstream"], case_sensitive=False),
              default="upstream", show_default=True)
@click.option("--max-depth", type=click.IntRange(min=0), default=None)
@pass_config
def trace_cmd(cfg: CliConfig, origin: str, direction: str, max_depth: Optional[int]):
    """Every simple path from ORIGIN along typed edges."""
    paths = trace(cfg.load(), origin, direction, max_depth)
    _emit(cfg, paths, lambda: "".join(
        " -> ".join([p.origin] + [f"[{h.kind.value}] {h.element_id}" for h in p.hops]) + "\n" for p in paths))


@cli.command()
@click.option("--family", default=None)
@click.option("--subkind", type=click.Choice([s.value for s in RequirementSubkind]), default=None)
@pass_config
def coverage(cfg: CliConfig, family: Optional[str], subkind: Optional[str]):
    """Which requirements are satisfied, and by what."""
    model = cfg.load()
    report = coverage_report(model, match_requirements(family, subkind) if (family or subkind) else None)

    def _render() -> str:
        body = _table(["requirement", "status", "satisfied_by", "derived"],
                      [(e.requirement_id, e.status.value, ", ".join(e.satisfied_by),
                        f"{e.derived_satisfied}/{e.derived_total}") for e in report.requirements])
        s = report.summary
        return body + f"\n{s.satisfied} of {s.total} requirements satisfied\n"
    _emit(cfg, report, _render)


@cli.command()
@pass_config
def orphans(cfg: CliConfig):
    """Unsatisfied requirements and elements with no path to strategy; exit 1 when any."""
    report = find_orphans(cfg.load())
    _emit(cfg, report, lambda: _table(
        ["id", "problem"],
        [(r, "unsatisfied") for r in report.unsatisfied_requirements]
        + [(e, "untraceable") for e in report.untraceable_elements]))
    if not report.empty:
        click.get_current_context().exit(1)


@cli.command()
@click.argument("origin")
@pass_config
def impact(cfg: CliConfig, origin: str):
    """Elements reached when ORIGIN changes."""
    report = impact_analysis(cfg.load(), origin)
    _emit(cfg, report, lambda: _table(
        ["element", "distance", "via"],
        [(e.element_id, e.distance, " -> ".join(h.element_id for h in e.path.hops)) for e in report.affected]))


@cli.command()
@click.option("--subject", default=None, help="Element to attach evidence to.")
@click.option("--ref", "evidence_ref", default=None, help="Evidence reference, e.g. a report URI.")
@click.option("--snapshot", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@pass_config
def evidence(cfg: CliConfig, subject: Optional[str], evidence_ref: Optional[str], snapshot: Optional[Path]):
    """List the body of evidence, or attach a reference with --subject/--ref/--snapshot."""
    model = cfg.load()
    if subject or evidence_ref or snapshot:
        if not (subject and evidence_ref and snapshot):
            raise click.UsageError("--subject, --ref and --snapshot go together")
        attach_evidence(model, subject, evidence_ref, digest_text(read_text(snapshot)))
        cfg.save(model)
        _status(f"evidence attached to {subject}")
        return
    entries = evidence_index(model)
    _emit(cfg, entries, lambda: _table(
        ["requirement", "source", "evidence"],
        [(e.requirement_id, e.requirement_id, doc) for e in entries for doc in e.own]
        + [(e.requirement_id, src, doc) for e in entries for src, docs in sorted(e.via.items()) for doc in docs]))


# -----------------------
# DIGITAL THREAD / TWIN
# -----------------------
@cli.command()
@click.argument("snapshot", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@pass_config
def drift(cfg: CliConfig, snapshot: Path):
    """Compare declared configuration against an observed snapshot; exit 1 on drift."""
    report = drift_report(cfg.load(), load_snapshot(snapshot))

    def _render() -> str:
        rows = [(f.match_key, f.attribute, "missing", f.declared, "") for f in report.missing_declared]
        rows += [(f.match_key, f.attribute, "mismatch", f.declared, f.observed) for f in report.value_mismatches]
        rows += [(u.match_key, u.attribute, "unexpected", "", u.observed) for u in report.unexpected_observed]
        text = _table(["host", "setting", "drift", "declared", "observed"], rows)
        if report.impacted_requirements:
            text += f"\nimpacted requirements: {', '.join(report.impacted_requirements)}\n"
        return text
    _emit(cfg, report, _render)
    if report.has_drift:
        click.get_current_context().exit(1)


@cli.command("export-snapshot")
@click.option("--captured-at", default="", help="Timestamp recorded in the snapshot.")
@pass_config
def export_snapshot_cmd(cfg: CliConfig, captured_at: str):
    """Observed-state snapshot generated from the declared model."""
    _write(cfg, dumps_canonical(export_snapshot(cfg.load(), captured_at)))


@cli.command()
@click.argument("changeset", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--save-twin", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Also write the resulting twin model.")
@pass_config
def simulate(cfg: CliConfig, changeset: Path, save_twin: Optional[Path]):
    """Apply a change set to a twin of the model and report what breaks."""
    twin, report = apply_changeset(fork_twin(cfg.load()), load_changeset(changeset))
    if save_twin is not None:
        save_model(twin, save_twin)

    def _render() -> str:
        return (f"applied ops: {report.applied_ops}\n"
                f"affected services: {', '.join(report.affected_services) or '-'}\n"
                f"affected requirements: {', '.join(report.affected_requirements) or '-'}\n")
    _emit(cfg, report, _render)


@cli.command()
@click.argument("other", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@pass_config
def diff(cfg: CliConfig, other: Path):
    """Delta from the model to OTHER."""
    delta = diff_models(cfg.load(), load_model(other))
    _emit(cfg, delta, lambda: _table(
        ["change", "collection", "id", "field"],
        [("added", e.collection, e.id, "") for e in delta.added]
        + [("removed", e.collection, e.id, "") for e in delta.removed]
        + [("changed", c.collection, c.id, c.field) for c in delta.changed]))


# -----------------------
# VIEWS
# -----------------------
@cli.command("view-create")
@click.argument("name")
@click.option("--layer", required=True, type=click.Choice([l.value for l in Layer]))
@click.option("--member", "members", multiple=True)
@click.option("--id", "view_id", default=None, help="Defaults to a slug of NAME.")
@click.option("--show-property", "show_properties", multiple=True)
@click.option("--show-sub-elements", is_flag=True)
@click.option("--edge-kind", "edge_kinds", multiple=True, type=click.Choice([k.value for k in RelationshipKind]))
@pass_config
def view_create_cmd(cfg: CliConfig, name, layer, members, view_id, show_properties, show_sub_elements, edge_kinds):
    """Create a view over existing elements."""
    model = cfg.load()
    display = {"show_properties": list(show_properties), "show_sub_elements": show_sub_elements,
               "include_edge_kinds": list(edge_kinds)}
    _, created = create_view(model, name, layer, members, display, view_id=view_id)
    cfg.save(model)
    _status(f"created view {created}")


@cli.command("view-render")
@click.argument("view_id")
@click.option("--render-format", type=click.Choice(RENDER_FORMATS), default="dot", show_default=True)
@pass_config
def view_render_cmd(cfg: CliConfig, view_id: str, render_format: str):
    """Render a view as DOT, GraphML or structured JSON."""
    _write(cfg, render_view(cfg.load(), view_id, render_format))


@cli.command("layer-report")
@click.option("--layer", required=True, type=click.Choice([l.value for l in Layer]))
@pass_config
def layer_report_cmd(cfg: CliConfig, layer: str):
    """Elements of one layer and the edges that cross out of it."""
    report = layer_report(cfg.load(), layer)

    def _render() -> str:
        text = _table(["element", "kind", "sub_elements", "name"],
                      [(e.element_id, e.kind.value, e.sub_element_count, e.name) for e in report.elements])
        text += "\n" + _table(["edge kind", "from", "to", "count"],
                              [(c.kind.value, c.source_layer.value, c.target_layer.value, c.count)
                               for c in report.cross_layer_edges])
        return text
    _emit(cfg, report, _render)


def main(argv: Optional[List[str]] = None) -> None:
    cli.main(args=argv, prog_name="loom")


if __name__ == "__main__":
    main()
