# loom_main/models/models_graph.py
from __future__ import annotations

import re
from enum import Enum
from typing import Container, Dict, Iterator, List, Optional, Set

from pydantic import BaseModel, ConfigDict, Field

from loom_main.config import SCHEMA_VERSION


class ElementKind(str, Enum):
    StrategicGoal = "StrategicGoal"
    EnterpriseObjective = "EnterpriseObjective"
    BusinessDriver = "BusinessDriver"
    SecurityDriver = "SecurityDriver"
    Requirement = "Requirement"
    ApplicationComponent = "ApplicationComponent"
    Service = "Service"
    TechnologyNode = "TechnologyNode"
    NetworkDevice = "NetworkDevice"
    ConfigurationItem = "ConfigurationItem"
    ExternalSystem = "ExternalSystem"


class RequirementSubkind(str, Enum):
    Functional = "Functional"
    Cybersecurity = "Cybersecurity"
    DerivedCybersecurity = "DerivedCybersecurity"


class Layer(str, Enum):
    Conceptual = "Conceptual"
    Requirements = "Requirements"
    Application = "Application"
    Technology = "Technology"


class RelationshipKind(str, Enum):
    DerivedFrom = "DerivedFrom"
    Satisfies = "Satisfies"
    Realizes = "Realizes"
    AllocatedTo = "AllocatedTo"
    ConnectsTo = "ConnectsTo"
    ExchangesWith = "ExchangesWith"
    Contains = "Contains"
    AssignedConfiguration = "AssignedConfiguration"
    Supports = "Supports"


STRATEGIC_KINDS = frozenset({
    ElementKind.StrategicGoal,
    ElementKind.EnterpriseObjective,
    ElementKind.BusinessDriver,
    ElementKind.SecurityDriver,
})

HARDWARE_KINDS = frozenset({ElementKind.TechnologyNode, ElementKind.NetworkDevice})


def kind_slug(kind: RelationshipKind) -> str:
    """DerivedFrom -> derived-from"""
    return re.sub(r"(?<!^)(?=[A-Z])", "-", RelationshipKind(kind).value).lower()


def relationship_id(kind: RelationshipKind, source: str, target: str) -> str:
    return f"{kind_slug(kind)}:{source}->{target}"


def free_relationship_id(kind: RelationshipKind, source: str, target: str, taken: Container[str]) -> str:
    """relationship_id, suffixed with #2, #3, ... while the id is held by a different triple.

    Element ids may themselves contain "->", so two triples can share a base id.
    """
    base = relationship_id(kind, source, target)
    rel_id, n = base, 1
    while rel_id in taken:
        n += 1
        rel_id = f"{base}#{n}"
    return rel_id


# -----------------------
# MODELS
# -----------------------
class Element(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = Field(min_length=1)
    name: str
    kind: ElementKind
    subkind: Optional[RequirementSubkind] = None
    layer_tags: Set[Layer] = Field(default_factory=set)
    properties: Dict[str, str] = Field(default_factory=dict)
    tags: Set[str] = Field(default_factory=set)
    documentation: List[str] = Field(default_factory=list)
    sub_elements: List[Element] = Field(default_factory=list)
    stereotype: Optional[str] = None

    def walk(self) -> Iterator[Element]:
        """Yield this element and every owned sub-element, depth first."""
        yield self
        for sub in self.sub_elements:
            yield from sub.walk()


class Relationship(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = Field(min_length=1)
    kind: RelationshipKind
    source: str
    target: str
    note: Optional[str] = None

    @property
    def triple(self):
        return (self.kind, self.source, self.target)


class Stereotype(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1)
    applies_to: ElementKind
    default_properties: Dict[str, str] = Field(default_factory=dict)
    baseline_sub_elements: List[Element] = Field(default_factory=list)


class ViewDisplay(BaseModel):
    model_config = ConfigDict(extra="forbid")

    show_properties: List[str] = Field(default_factory=list)
    show_sub_elements: bool = False
    include_edge_kinds: List[RelationshipKind] = Field(default_factory=list)


class View(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = Field(min_length=1)
    name: str
    layer: Layer
    members: List[str] = Field(default_factory=list)
    display: ViewDisplay = Field(default_factory=ViewDisplay)


class Model(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: str = SCHEMA_VERSION
    model_name: str = Field(min_length=1)
    elements: List[Element] = Field(default_factory=list)
    relationships: List[Relationship] = Field(default_factory=list)
    stereotypes: List[Stereotype] = Field(default_factory=list)
    views: List[View] = Field(default_factory=list)

    def iter_elements(self) -> Iterator[Element]:
        for element in self.elements:
            yield from element.walk()
