# loom_main/models/models_reports.py
from __future__ import annotations

from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from loom_main.models.models_graph import ElementKind, Layer, RelationshipKind, RequirementSubkind


# -----------------------
# VALIDATION
# -----------------------
class Severity(str, Enum):
    error = "error"
    warning = "warning"


class Finding(BaseModel):
    severity: Severity
    code: str
    subject: str
    message: str


class ElementUsage(BaseModel):
    element_id: str
    views: List[str] = Field(default_factory=list)
    relationships: List[str] = Field(default_factory=list)


# -----------------------
# INGEST
# -----------------------
class ControlRecord(BaseModel):
    control_id: str
    title: str
    family: str
    is_enhancement: bool = False
    parent_control_id: Optional[str] = None
    label: Optional[str] = None
    withdrawn: bool = False


class CciRecord(BaseModel):
    cci_id: str = Field(min_length=1)
    definition: str = ""
    control_ids: List[str] = Field(default_factory=list)


class SkippedRecord(BaseModel):
    record_id: str
    reason: str


class IngestReport(BaseModel):
    elements_created: int = 0
    edges_created: int = 0
    skipped: List[SkippedRecord] = Field(default_factory=list)
    source_digest: str = ""


class RequirementStats(BaseModel):
    requirement_elements: int
    direct_requirement_edges: int
    indirect_pairs: int
    total_records: int


class RequirementRow(BaseModel):
    requirement_id: str
    name: str
    subkind: Optional[RequirementSubkind] = None
    family: Optional[str] = None
    derived_from: List[str] = Field(default_factory=list)


# -----------------------
# TRACE
# -----------------------
class TraceDirection(str, Enum):
    Upstream = "Upstream"
    Downstream = "Downstream"


class TraceHop(BaseModel):
    element_id: str
    kind: RelationshipKind


class TracePath(BaseModel):
    origin: str
    hops: List[TraceHop] = Field(default_factory=list)

    @property
    def terminus(self) -> str:
        return self.hops[-1].element_id if self.hops else self.origin

    def sort_key(self):
        return [(hop.element_id, hop.kind.value) for hop in self.hops]


class CoverageStatus(str, Enum):
    Satisfied = "Satisfied"
    Unsatisfied = "Unsatisfied"


class CoverageEntry(BaseModel):
    requirement_id: str
    satisfied_by: List[str] = Field(default_factory=list)
    status: CoverageStatus
    # rollup of direct DerivedFrom children; informational only
    derived_total: int = 0
    derived_satisfied: int = 0


class CoverageSummary(BaseModel):
    total: int = 0
    satisfied: int = 0
    unsatisfied: int = 0


class CoverageReport(BaseModel):
    requirements: List[CoverageEntry] = Field(default_factory=list)
    summary: CoverageSummary = Field(default_factory=CoverageSummary)

    @property
    def satisfied_ids(self) -> List[str]:
        return [e.requirement_id for e in self.requirements if e.status == CoverageStatus.Satisfied]


class OrphanReport(BaseModel):
    unsatisfied_requirements: List[str] = Field(default_factory=list)
    untraceable_elements: List[str] = Field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.unsatisfied_requirements and not self.untraceable_elements


class ImpactEntry(BaseModel):
    element_id: str
    distance: int
    path: TracePath


class ImpactReport(BaseModel):
    origin: str
    affected: List[ImpactEntry] = Field(default_factory=list)
    affected_requirements: List[str] = Field(default_factory=list)


class EvidenceEntry(BaseModel):
    requirement_id: str
    own: List[str] = Field(default_factory=list)
    # satisfying element id -> its documentation
    via: Dict[str, List[str]] = Field(default_factory=dict)


# -----------------------
# VIEWS
# -----------------------
class LayerEntry(BaseModel):
    element_id: str
    name: str
    kind: ElementKind
    sub_element_count: int = 0


class CrossLayerCount(BaseModel):
    kind: RelationshipKind
    source_layer: Layer
    target_layer: Layer
    count: int


class LayerReport(BaseModel):
    layer: Layer
    elements: List[LayerEntry] = Field(default_factory=list)
    cross_layer_edges: List[CrossLayerCount] = Field(default_factory=list)
