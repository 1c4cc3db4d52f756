# loom_main/main_agents/view_export.py
"""Layer views over shared elements and their DOT / GraphML / structured renderings.

Views hold element ids only. Renderings are pure projections of the model and
carry no layout.
"""
from __future__ import annotations

import logging
import re
from collections import Counter
from typing import Dict, Iterable, List, Optional, Set, Tuple, Union

from lxml import etree

from loom_main.errors import ConflictError, DanglingReferenceError, ModelInputError, NotFoundError
from loom_main.main_agents.model_core import ModelIndex
from loom_main.main_agents.model_store import canonical_dict, dumps_canonical
from loom_main.models.models_graph import Element, Layer, Model, Relationship, View, ViewDisplay
from loom_main.models.models_reports import CrossLayerCount, LayerEntry, LayerReport

logger = logging.getLogger(__name__)

RENDER_FORMATS = ("dot", "graphml", "structured")

GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"
XSI_NS = "http://www.w3.org/2001/XMLSchema-instance"
GRAPHML_SCHEMA = f"{GRAPHML_NS} {GRAPHML_NS}/1.0/graphml.xsd"


def view_slug(name: str) -> str:
    """Conceptual/Strategic View -> conceptual-strategic-view"""
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")


def _get_view(model: Model, view_id: str) -> View:
    for view in model.views:
        if view.id == view_id:
            return view
    raise NotFoundError(f"unknown view {view_id!r}")


# -----------------------
# VIEWS
# -----------------------
def create_view(
    model: Model,
    name: str,
    layer: Union[str, Layer],
    members: Iterable[str] = (),
    display: Union[ViewDisplay, dict, None] = None,
    view_id: Optional[str] = None,
) -> Tuple[Model, str]:
    try:
        layer = Layer(layer)
        display = ViewDisplay.model_validate(display or {}) if not isinstance(display, ViewDisplay) else display
    except ValueError as exc:
        raise ModelInputError(f"invalid view settings: {exc}") from None
    view_id = view_id or view_slug(name)
    if not view_id:
        raise ModelInputError(f"cannot derive a view id from {name!r}")
    if any(v.id == view_id for v in model.views):
        raise ConflictError(f"view id already present: {view_id}")

    members = list(dict.fromkeys(members))
    index = ModelIndex(model)
    missing = sorted(m for m in members if m not in index.elements)
    if missing:
        raise DanglingReferenceError(f"view {view_id} references unknown elements: {', '.join(missing)}", missing)

    model.views.append(View(id=view_id, name=name, layer=layer, members=members,
                            display=display.model_copy(deep=True)))
    logger.info("[view] created %s with %d members", view_id, len(members))
    return model, view_id


def view_members(index: ModelIndex, view: View) -> List[Element]:
    """Member elements, widened to their sub-elements when the view shows them."""
    members: Dict[str, Element] = {}
    for member_id in view.members:
        element = index.elements.get(member_id)
        if element is None:
            continue
        parts = element.walk() if view.display.show_sub_elements else [element]
        for part in parts:
            members[part.id] = part
    return [members[k] for k in sorted(members)]


def view_edges(index: ModelIndex, view: View, member_ids: Set[str]) -> List[Relationship]:
    kinds = set(view.display.include_edge_kinds)
    edges = [r for r in index.relationships.values()
             if r.kind in kinds and r.source in member_ids and r.target in member_ids]
    edges.sort(key=lambda r: (r.source, r.target, r.kind.value))
    return edges


# -----------------------
# DOT
# -----------------------
def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _node_label_lines(element: Element, show_properties: List[str]) -> List[str]:
    lines = [element.name]
    for key in show_properties:
        if key in element.properties:
            lines.append(f"{key}: {element.properties[key]}")
    return lines


def _dot_label(lines: List[str]) -> str:
    return "\\n".join(_dot_quote(line)[1:-1] for line in lines)


def render_dot(view: View, members: List[Element], edges: List[Relationship]) -> str:
    out = [
        f"digraph {_dot_quote(view.id)} {{",
        f"  graph [label={_dot_quote(view.name)}, labelloc=\"t\"];",
        '  node [shape="box"];',
    ]
    for element in members:
        label = _dot_label(_node_label_lines(element, view.display.show_properties))
        out.append(f"  {_dot_quote(element.id)} [label=\"{label}\"];")
    for rel in edges:
        out.append(f"  {_dot_quote(rel.source)} -> {_dot_quote(rel.target)} [label={_dot_quote(rel.kind.value)}];")
    out.append("}")
    return "\n".join(out) + "\n"


# -----------------------
# GRAPHML
# -----------------------
def render_graphml(view: View, members: List[Element], edges: List[Relationship]) -> str:
    root = etree.Element("graphml", nsmap={None: GRAPHML_NS, "xsi": XSI_NS})
    root.set(f"{{{XSI_NS}}}schemaLocation", GRAPHML_SCHEMA)

    node_keys = [("name", "name"), ("kind", "kind"), ("layer_tags", "layer_tags")]
    node_keys += [(f"property.{key}", key) for key in view.display.show_properties]
    key_ids: Dict[str, str] = {}
    for position, (attr_name, _source) in enumerate(node_keys):
        key_ids[attr_name] = f"d{position}"
        etree.SubElement(root, "key", {"id": key_ids[attr_name], "for": "node",
                                        "attr.name": attr_name, "attr.type": "string"})
    edge_key = f"d{len(node_keys)}"
    etree.SubElement(root, "key", {"id": edge_key, "for": "edge", "attr.name": "kind", "attr.type": "string"})

    graph = etree.SubElement(root, "graph", {"id": view.id, "edgedefault": "directed"})
    for element in members:
        node = etree.SubElement(graph, "node", {"id": element.id})
        values = {
            "name": element.name,
            "kind": element.kind.value,
            "layer_tags": ",".join(sorted(t.value for t in element.layer_tags)),
        }
        for attr_name, source in node_keys[3:]:
            if source in element.properties:
                values[attr_name] = element.properties[source]
        for attr_name, _source in node_keys:
            if attr_name in values:
                data = etree.SubElement(node, "data", {"key": key_ids[attr_name]})
                data.text = values[attr_name]
    for rel in edges:
        edge = etree.SubElement(graph, "edge", {"id": rel.id, "source": rel.source, "target": rel.target})
        data = etree.SubElement(edge, "data", {"key": edge_key})
        data.text = rel.kind.value
    return etree.tostring(root, pretty_print=True, xml_declaration=True, encoding="UTF-8").decode("utf-8")


# -----------------------
# STRUCTURED
# -----------------------
def render_structured(model: Model, view: View, members: List[Element], edges: List[Relationship]) -> str:
    shown = set(view.display.show_properties)
    records = []
    for element in members:
        record = element.model_dump(mode="json")
        record["properties"] = {k: v for k, v in record["properties"].items() if k in shown}
        record["layer_tags"] = sorted(record["layer_tags"])
        record["tags"] = sorted(record["tags"])
        if view.display.show_sub_elements:
            record["sub_elements"] = sorted(s.id for s in element.sub_elements)
        else:
            del record["sub_elements"]
        records.append(record)
    stored_view = next(v for v in canonical_dict(model)["views"] if v["id"] == view.id)
    return dumps_canonical({
        "view": stored_view,
        "elements": records,
        "relationships": [r.model_dump(mode="json") for r in edges],
    })


def render_view(model: Model, view_id: str, fmt: str = "dot") -> str:
    view = _get_view(model, view_id)
    if fmt not in RENDER_FORMATS:
        raise ModelInputError(f"unknown render format {fmt!r}; expected one of {', '.join(RENDER_FORMATS)}")
    index = ModelIndex(model)
    members = view_members(index, view)
    edges = view_edges(index, view, {e.id for e in members})
    if fmt == "dot":
        return render_dot(view, members, edges)
    if fmt == "graphml":
        return render_graphml(view, members, edges)
    return render_structured(model, view, members, edges)


# -----------------------
# LAYERS
# -----------------------
def layer_report(model: Model, layer: Union[str, Layer]) -> LayerReport:
    try:
        layer = Layer(layer)
    except ValueError:
        raise ModelInputError(f"unknown layer {layer!r}") from None
    index = ModelIndex(model)
    entries = [
        LayerEntry(element_id=e.id, name=e.name, kind=e.kind, sub_element_count=sum(1 for _ in e.walk()) - 1)
        for e in sorted(model.elements, key=lambda e: e.id) if layer in e.layer_tags
    ]

    counts: Counter = Counter()
    for rel in index.relationships.values():
        source, target = index.elements.get(rel.source), index.elements.get(rel.target)
        if source is None or target is None:
            continue
        for source_layer in source.layer_tags:
            for target_layer in target.layer_tags:
                if source_layer != target_layer and layer in (source_layer, target_layer):
                    counts[(rel.kind, source_layer, target_layer)] += 1
    cross = [CrossLayerCount(kind=k, source_layer=s, target_layer=t, count=n)
             for (k, s, t), n in sorted(counts.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value, kv[0][2].value))]
    return LayerReport(layer=layer, elements=entries, cross_layer_edges=cross)
