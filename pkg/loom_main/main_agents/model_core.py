# loom_main/main_agents/model_core.py
from __future__ import annotations

import logging
from collections import defaultdict
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

from pydantic import ValidationError

from loom_main.config import SCHEMA_VERSION
from loom_main.errors import (
    ConflictError,
    ConstraintError,
    DanglingReferenceError,
    ModelInputError,
    NotFoundError,
    ReferencedError,
)
from loom_main.models.models_graph import (
    STRATEGIC_KINDS,
    Element,
    ElementKind,
    Model,
    Relationship,
    RelationshipKind,
    Stereotype,
    free_relationship_id,
)
from loom_main.models.models_reports import ElementUsage, Finding, Severity

logger = logging.getLogger(__name__)

K = ElementKind
ANY_KIND: FrozenSet[ElementKind] = frozenset(ElementKind)
_COMPONENTS = frozenset({K.ApplicationComponent, K.Service, K.TechnologyNode, K.NetworkDevice, K.ExternalSystem})

# -----------------------
# ENDPOINT CONSTRAINTS
# -----------------------
# kind -> list of (allowed source kinds, allowed target kinds)
KIND_CONSTRAINTS: Dict[RelationshipKind, List[Tuple[FrozenSet[ElementKind], FrozenSet[ElementKind]]]] = {
    RelationshipKind.DerivedFrom: [
        (frozenset({K.Requirement}), frozenset({K.Requirement})),
        (frozenset({K.Requirement}), STRATEGIC_KINDS),
    ],
    RelationshipKind.Satisfies: [
        (frozenset({K.ConfigurationItem, K.ApplicationComponent, K.TechnologyNode, K.Service}),
         frozenset({K.Requirement})),
    ],
    RelationshipKind.Realizes: [
        (frozenset({K.ApplicationComponent, K.Service}), frozenset({K.Requirement})),
        (frozenset({K.TechnologyNode}), frozenset({K.ApplicationComponent})),
    ],
    RelationshipKind.AllocatedTo: [
        (frozenset({K.Requirement}), frozenset({K.ApplicationComponent, K.TechnologyNode})),
    ],
    RelationshipKind.ConnectsTo: [(_COMPONENTS, _COMPONENTS)],
    RelationshipKind.ExchangesWith: [(_COMPONENTS, _COMPONENTS)],
    RelationshipKind.Contains: [(ANY_KIND, ANY_KIND)],
    RelationshipKind.AssignedConfiguration: [
        (frozenset({K.TechnologyNode, K.NetworkDevice, K.ApplicationComponent}),
         frozenset({K.ConfigurationItem})),
    ],
    RelationshipKind.Supports: [
        (frozenset({K.EnterpriseObjective}), frozenset({K.StrategicGoal})),
        (frozenset({K.BusinessDriver, K.SecurityDriver}), frozenset({K.EnterpriseObjective})),
        # provider supports consumer; declares service dependencies
        (frozenset({K.Service, K.ApplicationComponent, K.TechnologyNode}),
         frozenset({K.Service, K.ApplicationComponent})),
    ],
}

CONFIGURABLE_KINDS = KIND_CONSTRAINTS[RelationshipKind.AssignedConfiguration][0][0]


def endpoint_allowed(kind: RelationshipKind, source_kind: ElementKind, target_kind: ElementKind) -> bool:
    return any(source_kind in sources and target_kind in targets
               for sources, targets in KIND_CONSTRAINTS[RelationshipKind(kind)])


# -----------------------
# INDEX
# -----------------------
class ModelIndex:
    """Lookup tables over one model value. Build once per query; never cache across edits."""

    def __init__(self, model: Model):
        self.elements: Dict[str, Element] = {}
        self.parent: Dict[str, Optional[str]] = {}
        self.duplicate_ids: List[str] = []
        for top in model.elements:
            self._register(top, None)

        self.relationships: Dict[str, Relationship] = {}
        self.outgoing: Dict[str, List[Relationship]] = defaultdict(list)
        self.incoming: Dict[str, List[Relationship]] = defaultdict(list)
        self.triples: Dict[Tuple, str] = {}
        for rel in model.relationships:
            self.relationships.setdefault(rel.id, rel)
            self.triples.setdefault(rel.triple, rel.id)
            self.outgoing[rel.source].append(rel)
            self.incoming[rel.target].append(rel)

        self.stereotypes: Dict[str, Stereotype] = {s.name: s for s in model.stereotypes}
        self.view_members: Dict[str, List[str]] = defaultdict(list)
        for view in model.views:
            for member in view.members:
                self.view_members[member].append(view.id)

    def _register(self, element: Element, parent: Optional[str]) -> None:
        if element.id in self.elements:
            self.duplicate_ids.append(element.id)
        else:
            self.elements[element.id] = element
            self.parent[element.id] = parent
        for sub in element.sub_elements:
            self._register(sub, element.id)

    def get(self, element_id: str) -> Element:
        try:
            return self.elements[element_id]
        except KeyError:
            raise NotFoundError(f"unknown element {element_id!r}") from None

    def subtree_ids(self, element_id: str) -> Set[str]:
        return {e.id for e in self.get(element_id).walk()}

    def owners(self, element_id: str) -> List[str]:
        """Ancestors of a sub-element, nearest first."""
        chain = []
        current = self.parent.get(element_id)
        while current is not None:
            chain.append(current)
            current = self.parent.get(current)
        return chain

    def incident(self, ids: Iterable[str]) -> List[Relationship]:
        seen: Dict[str, Relationship] = {}
        for element_id in ids:
            for rel in self.outgoing.get(element_id, []) + self.incoming.get(element_id, []):
                seen[rel.id] = rel
        return [seen[k] for k in sorted(seen)]


def _coerce_kind(kind: Union[str, RelationshipKind]) -> RelationshipKind:
    try:
        return RelationshipKind(kind)
    except ValueError:
        raise ModelInputError(f"unknown relationship kind {kind!r}") from None


# -----------------------
# PUBLIC API
# -----------------------
def create_model(name: str) -> Model:
    if not name or not name.strip():
        raise ModelInputError("model name must be non-empty")
    return Model(schema_version=SCHEMA_VERSION, model_name=name)


def get_element(model: Model, element_id: str) -> Element:
    return ModelIndex(model).get(element_id)


def _check_new_element(element: Element, known: Set[str], stereotypes: Dict[str, Stereotype]) -> None:
    ids = [e.id for e in element.walk()]
    clashes = sorted({i for i in ids if i in known} | {i for i in ids if ids.count(i) > 1})
    if clashes:
        raise ConflictError(f"element id already present: {', '.join(clashes)}")
    for e in element.walk():
        if e.subkind is not None and e.kind != ElementKind.Requirement:
            raise ModelInputError(f"{e.id}: only Requirement elements carry a subkind")
        if e.stereotype is not None and e.stereotype not in stereotypes:
            raise NotFoundError(f"{e.id}: unknown stereotype {e.stereotype!r}")


def add_element(model: Model, element: Union[Element, dict]) -> Model:
    if isinstance(element, dict):
        try:
            element = Element.model_validate(element)
        except ValidationError as exc:
            raise ModelInputError(f"invalid element: {exc}") from None
    index = ModelIndex(model)
    _check_new_element(element, set(index.elements), index.stereotypes)
    model.elements.append(element.model_copy(deep=True))
    logger.debug("[model] added %s (%s)", element.id, element.kind.value)
    return model


def _check_relationship(index: ModelIndex, kind: RelationshipKind, source: str, target: str) -> None:
    missing = [i for i in (source, target) if i not in index.elements]
    if missing:
        raise DanglingReferenceError(f"{kind.value} endpoint not in model: {', '.join(missing)}", missing)
    if source == target:
        raise ConstraintError(f"{kind.value} self-loop on {source}")
    s_kind, t_kind = index.elements[source].kind, index.elements[target].kind
    if not endpoint_allowed(kind, s_kind, t_kind):
        raise ConstraintError(f"{kind.value} not allowed from {s_kind.value} to {t_kind.value}")
    if (kind, source, target) in index.triples:
        raise ConflictError(f"duplicate {kind.value} edge {source} -> {target}")


def add_relationship(
    model: Model,
    kind: Union[str, RelationshipKind],
    source: str,
    target: str,
    note: Optional[str] = None,
    rel_id: Optional[str] = None,
) -> Model:
    kind = _coerce_kind(kind)
    index = ModelIndex(model)
    _check_relationship(index, kind, source, target)
    rel_id = rel_id or free_relationship_id(kind, source, target, index.relationships)
    if rel_id in index.relationships:
        raise ConflictError(f"relationship id already present: {rel_id}")
    model.relationships.append(Relationship(id=rel_id, kind=kind, source=source, target=target, note=note))
    return model


def remove_relationship(model: Model, rel_id: str) -> Model:
    for position, rel in enumerate(model.relationships):
        if rel.id == rel_id:
            del model.relationships[position]
            return model
    raise NotFoundError(f"unknown relationship {rel_id!r}")


def _detach(elements: List[Element], element_id: str) -> bool:
    for position, element in enumerate(elements):
        if element.id == element_id:
            del elements[position]
            return True
        if _detach(element.sub_elements, element_id):
            return True
    return False


def remove_element(model: Model, element_id: str, mode: str = "refuse_if_referenced") -> Tuple[Model, List[str]]:
    """Remove an element and its sub-elements.

    Edges running entirely inside the removed subtree never block refuse mode.
    In cascade mode the returned list holds the removed element ids and edge ids.
    """
    if mode not in ("refuse_if_referenced", "cascade"):
        raise ModelInputError(f"unknown removal mode {mode!r}")
    index = ModelIndex(model)
    subtree = index.subtree_ids(element_id)
    edges = index.incident(subtree)
    views = sorted({v for i in subtree for v in index.view_members.get(i, [])})

    if mode == "refuse_if_referenced":
        blocking = [r.id for r in edges if not (r.source in subtree and r.target in subtree)]
        referrers = blocking + [f"view:{v}" for v in views]
        if referrers:
            raise ReferencedError(element_id, referrers)

    edge_ids = {r.id for r in edges}
    model.relationships = [r for r in model.relationships if r.id not in edge_ids]
    for view in model.views:
        view.members = [m for m in view.members if m not in subtree]
    _detach(model.elements, element_id)

    removed = sorted(subtree) + sorted(edge_ids)
    logger.info("[model] removed %s (%d ids)", element_id, len(removed))
    return model, removed


def rename_element(model: Model, element_id: str, name: str) -> Model:
    get_element(model, element_id).name = name
    return model


def set_property(model: Model, element_id: str, key: str, value: Optional[str]) -> Model:
    element = get_element(model, element_id)
    if value is None:
        element.properties.pop(key, None)
    else:
        element.properties[key] = str(value)
    return model


def element_usage(model: Model, element_id: str) -> ElementUsage:
    index = ModelIndex(model)
    index.get(element_id)
    return ElementUsage(
        element_id=element_id,
        views=sorted(index.view_members.get(element_id, [])),
        relationships=[r.id for r in index.incident([element_id])],
    )


# -----------------------
# STEREOTYPES
# -----------------------
def add_stereotype(model: Model, stereotype: Union[Stereotype, dict]) -> Model:
    if isinstance(stereotype, dict):
        try:
            stereotype = Stereotype.model_validate(stereotype)
        except ValidationError as exc:
            raise ModelInputError(f"invalid stereotype: {exc}") from None
    if any(s.name == stereotype.name for s in model.stereotypes):
        raise ConflictError(f"stereotype already present: {stereotype.name}")
    _check_baseline(stereotype, stereotype.baseline_sub_elements)
    model.stereotypes.append(stereotype.model_copy(deep=True))
    return model


def _check_baseline(stereotype: Stereotype, templates: List[Element]) -> None:
    if templates and stereotype.applies_to not in CONFIGURABLE_KINDS:
        raise ConstraintError(f"{stereotype.name}: {stereotype.applies_to.value} cannot carry baseline configuration")
    for template in templates:
        if template.kind != ElementKind.ConfigurationItem:
            raise ConstraintError(f"{stereotype.name}: baseline {template.id} must be a ConfigurationItem")


def _instantiate(template: Element, owner_id: str) -> Element:
    instance = template.model_copy(deep=True)
    for part in instance.walk():
        part.id = f"{owner_id}.{part.id}"
    return instance


def _pending_instances(index: ModelIndex, element: Element, templates: List[Element]) -> List[Element]:
    """Instances of templates not yet present under element; raises on foreign id clashes."""
    owned = {e.id for e in element.walk()}
    pending = []
    for template in templates:
        instance = _instantiate(template, element.id)
        if instance.id in owned:
            continue
        clashes = [p.id for p in instance.walk() if p.id in index.elements]
        if clashes:
            raise ConflictError(f"baseline instance id already present: {', '.join(clashes)}")
        pending.append(instance)
    return pending


def _attach_instances(model: Model, element: Element, instances: List[Element]) -> None:
    taken = {rel.id for rel in model.relationships}
    for instance in instances:
        element.sub_elements.append(instance)
        rel_id = free_relationship_id(RelationshipKind.AssignedConfiguration, element.id, instance.id, taken)
        taken.add(rel_id)
        model.relationships.append(Relationship(
            id=rel_id,
            kind=RelationshipKind.AssignedConfiguration,
            source=element.id,
            target=instance.id,
        ))


def _get_stereotype(model: Model, name: str) -> Stereotype:
    for stereotype in model.stereotypes:
        if stereotype.name == name:
            return stereotype
    raise NotFoundError(f"unknown stereotype {name!r}")


def assign_stereotype(model: Model, element_id: str, stereotype_name: str) -> Model:
    """Apply a stereotype: defaults merge under instance values, baselines instantiate once."""
    stereotype = _get_stereotype(model, stereotype_name)
    index = ModelIndex(model)
    element = index.get(element_id)
    if element.kind != stereotype.applies_to:
        raise ConstraintError(
            f"{stereotype.name} applies to {stereotype.applies_to.value}, not {element.kind.value}")
    pending = _pending_instances(index, element, stereotype.baseline_sub_elements)

    for key, value in stereotype.default_properties.items():
        element.properties.setdefault(key, value)
    element.stereotype = stereotype.name
    _attach_instances(model, element, pending)
    logger.debug("[stereotype] %s -> %s (+%d sub-elements)", stereotype.name, element_id, len(pending))
    return model


def update_stereotype_baseline(model: Model, stereotype_name: str, template: Union[Element, dict]) -> Tuple[Model, int]:
    if isinstance(template, dict):
        try:
            template = Element.model_validate(template)
        except ValidationError as exc:
            raise ModelInputError(f"invalid baseline template: {exc}") from None
    stereotype = _get_stereotype(model, stereotype_name)
    if any(t.id == template.id for t in stereotype.baseline_sub_elements):
        raise ConflictError(f"{stereotype_name} already has baseline {template.id}")
    _check_baseline(stereotype, [template])

    index = ModelIndex(model)
    assigned = [e for e in model.iter_elements() if e.stereotype == stereotype_name]
    plan = [(element, _pending_instances(index, element, [template])) for element in assigned]

    stereotype.baseline_sub_elements.append(template.model_copy(deep=True))
    for element, instances in plan:
        _attach_instances(model, element, instances)
    logger.info("[stereotype] %s baseline +%s applied to %d elements", stereotype_name, template.id, len(plan))
    return model, len(plan)


# -----------------------
# VALIDATION
# -----------------------
def _finding(code: str, subject: str, message: str, severity: Severity = Severity.error) -> Finding:
    return Finding(severity=severity, code=code, subject=subject, message=message)


def validate_model(model: Model) -> List[Finding]:
    """Check every type invariant; an empty list means the model is valid."""
    index = ModelIndex(model)
    findings: List[Finding] = []

    for dup in index.duplicate_ids:
        findings.append(_finding("duplicate-id", dup, f"element id {dup} appears more than once"))

    for element in model.iter_elements():
        if element.subkind is not None and element.kind != ElementKind.Requirement:
            findings.append(_finding("subkind-mismatch", element.id,
                                     f"{element.kind.value} carries subkind {element.subkind.value}"))
        if element.stereotype is not None:
            stereotype = index.stereotypes.get(element.stereotype)
            if stereotype is None:
                findings.append(_finding("unknown-stereotype", element.id,
                                         f"stereotype {element.stereotype} is not defined"))
            elif stereotype.applies_to != element.kind:
                findings.append(_finding("stereotype-kind-mismatch", element.id,
                                         f"{stereotype.name} applies to {stereotype.applies_to.value}"))

    seen_rel_ids: Set[str] = set()
    seen_triples: Set[Tuple] = set()
    for rel in sorted(model.relationships, key=lambda r: r.id):
        if rel.id in seen_rel_ids:
            findings.append(_finding("duplicate-relationship-id", rel.id, "relationship id appears more than once"))
            continue
        seen_rel_ids.add(rel.id)
        missing = [i for i in (rel.source, rel.target) if i not in index.elements]
        if missing:
            findings.append(_finding("dangling-reference", rel.id, f"endpoint not in model: {', '.join(missing)}"))
            continue
        if rel.triple in seen_triples:
            findings.append(_finding("duplicate-edge", rel.id,
                                     f"duplicate {rel.kind.value} edge {rel.source} -> {rel.target}"))
            continue
        seen_triples.add(rel.triple)
        if rel.source == rel.target:
            findings.append(_finding("self-loop", rel.id, f"{rel.kind.value} self-loop on {rel.source}"))
            continue
        s_kind, t_kind = index.elements[rel.source].kind, index.elements[rel.target].kind
        if not endpoint_allowed(rel.kind, s_kind, t_kind):
            findings.append(_finding("kind-constraint", rel.id,
                                     f"{rel.kind.value} not allowed from {s_kind.value} to {t_kind.value}"))

    names = [s.name for s in model.stereotypes]
    for name in sorted({n for n in names if names.count(n) > 1}):
        findings.append(_finding("duplicate-stereotype", name, "stereotype name appears more than once"))

    view_ids = [v.id for v in model.views]
    for view_id in sorted({v for v in view_ids if view_ids.count(v) > 1}):
        findings.append(_finding("duplicate-view-id", view_id, "view id appears more than once"))
    for view in model.views:
        for member in view.members:
            if member not in index.elements:
                findings.append(_finding("dangling-view-member", f"{view.id}/{member}",
                                         f"view {view.id} references missing element {member}"))

    findings.sort(key=lambda f: (f.code, f.subject))
    return findings
