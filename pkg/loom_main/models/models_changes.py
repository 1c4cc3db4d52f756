# loom_main/models/models_changes.py
from __future__ import annotations

from typing import Any, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field
from typing_extensions import Annotated

from loom_main.models.models_graph import Element, RelationshipKind


# -----------------------
# CHANGE OPS
# -----------------------
class _Op(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RemoveElement(_Op):
    op: Literal["remove_element"] = "remove_element"
    id: str
    mode: Literal["cascade", "refuse_if_referenced"] = "cascade"


class AddElement(_Op):
    op: Literal["add_element"] = "add_element"
    element: Element


class AddRelationship(_Op):
    op: Literal["add_relationship"] = "add_relationship"
    kind: RelationshipKind
    source: str
    target: str
    note: Optional[str] = None


class RemoveRelationship(_Op):
    op: Literal["remove_relationship"] = "remove_relationship"
    id: str


class SetProperty(_Op):
    op: Literal["set_property"] = "set_property"
    id: str
    key: str
    value: Optional[str] = None  # None drops the key


class FailElement(_Op):
    op: Literal["fail_element"] = "fail_element"
    id: str


ChangeOp = Annotated[
    Union[RemoveElement, AddElement, AddRelationship, RemoveRelationship, SetProperty, FailElement],
    Field(discriminator="op"),
]


class ChangeSet(BaseModel):
    model_config = ConfigDict(extra="forbid")

    changes: List[ChangeOp] = Field(default_factory=list)


# -----------------------
# DELTA / REPORT
# -----------------------
class DeltaEntry(BaseModel):
    collection: Literal["elements", "relationships", "stereotypes", "views"]
    id: str
    record: Optional[Any] = None  # canonical record, kept for added entries


class FieldChange(BaseModel):
    collection: Literal["elements", "relationships", "stereotypes", "views", "model"]
    id: str
    field: str
    before: Optional[Any] = None
    after: Optional[Any] = None


class ModelDelta(BaseModel):
    added: List[DeltaEntry] = Field(default_factory=list)
    removed: List[DeltaEntry] = Field(default_factory=list)
    changed: List[FieldChange] = Field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not (self.added or self.removed or self.changed)


class SimulationReport(BaseModel):
    applied_ops: int = 0
    affected_services: List[str] = Field(default_factory=list)
    affected_requirements: List[str] = Field(default_factory=list)
    diff: ModelDelta = Field(default_factory=ModelDelta)
