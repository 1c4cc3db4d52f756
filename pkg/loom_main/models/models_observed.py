# loom_main/models/models_observed.py
from __future__ import annotations

from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ItemKind(str, Enum):
    Node = "Node"
    InstalledApplication = "InstalledApplication"
    ConfigurationSetting = "ConfigurationSetting"
    Finding = "Finding"


class SourceTool(str, Enum):
    monitoring = "monitoring"
    siem = "siem"
    vuln_scanner = "vuln_scanner"


class ObservedItem(BaseModel):
    model_config = ConfigDict(extra="forbid")

    match_key: str = Field(min_length=1)
    item_kind: ItemKind
    name: str
    attributes: Dict[str, str] = Field(default_factory=dict)

    @field_validator("attributes")
    @classmethod
    def _known_source(cls, value: Dict[str, str]) -> Dict[str, str]:
        source = value.get("source")
        if source is None:
            raise ValueError("attributes.source is required")
        SourceTool(source)  # raises on unknown tools
        return value

    @property
    def key(self):
        return (self.match_key, self.item_kind, self.name)


class ObservedSnapshot(BaseModel):
    model_config = ConfigDict(extra="forbid")

    captured_at: str
    items: List[ObservedItem] = Field(default_factory=list)

    @model_validator(mode="after")
    def _unique_items(self) -> "ObservedSnapshot":
        seen = set()
        for item in self.items:
            if item.key in seen:
                raise ValueError(f"duplicate observed item {item.match_key}/{item.item_kind.value}/{item.name}")
            seen.add(item.key)
        return self


class Binding(BaseModel):
    element_id: str
    match_key: str


class BindingResult(BaseModel):
    bound: List[Binding] = Field(default_factory=list)
    unbound: List[ObservedItem] = Field(default_factory=list)


class SettingFinding(BaseModel):
    element_id: str
    attribute: str
    match_key: str
    declared: Optional[str] = None
    observed: Optional[str] = None


class UnexpectedSetting(BaseModel):
    match_key: str
    attribute: str
    observed: Optional[str] = None
    element_id: Optional[str] = None  # bound host, if any


class DriftReport(BaseModel):
    captured_at: str = ""
    bound: List[Binding] = Field(default_factory=list)
    missing_declared: List[SettingFinding] = Field(default_factory=list)
    unexpected_observed: List[UnexpectedSetting] = Field(default_factory=list)
    value_mismatches: List[SettingFinding] = Field(default_factory=list)
    impacted_requirements: List[str] = Field(default_factory=list)
    # notices; never counted as drift
    absent_nodes: List[str] = Field(default_factory=list)
    unbound: List[ObservedItem] = Field(default_factory=list)
    findings: List[ObservedItem] = Field(default_factory=list)

    @property
    def finding_count(self) -> int:
        return len(self.missing_declared) + len(self.unexpected_observed) + len(self.value_mismatches)

    @property
    def has_drift(self) -> bool:
        return self.finding_count > 0
