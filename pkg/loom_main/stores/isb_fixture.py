# loom_main/stores/isb_fixture.py
"""Bundled reference model: a small Information Systems Baseline (ISB) enclave.

Built only through the public model operations, so it doubles as an end-to-end
exercise of authoring, stereotypes and views.
"""
from __future__ import annotations

from typing import Dict, List, Optional

from loom_main.main_agents import model_core
from loom_main.main_agents.view_export import create_view
from loom_main.models.models_graph import Element, ElementKind, Layer, Model, RelationshipKind, RequirementSubkind

K = ElementKind
R = RelationshipKind

MODEL_NAME = "ISB"
GOAL_ID = "goal-fulfill-mission"
RMF_ROOT_ID = "req-rmf"
SWITCH_CONFIG_ID = "network-switch-config"
SERVER_STEREOTYPE = "windows-server-baseline"
CONCEPTUAL_VIEW_ID = "conceptual-strategic"

HARDWARE_IDS = ["app-server", "domain-controller", "network-switch", "security-server", "windows-workstation"]

# control id -> (label, title)
CONTROLS: Dict[str, tuple] = {
    "ac-2": ("AC-2", "Account Management"),
    "ac-17": ("AC-17", "Remote Access"),
    "au-2": ("AU-2", "Event Logging"),
    "cm-6": ("CM-6", "Configuration Settings"),
    "cm-7": ("CM-7", "Least Functionality"),
    "ia-2": ("IA-2", "Identification and Authentication (Organizational Users)"),
    "ra-5": ("RA-5", "Vulnerability Monitoring and Scanning"),
    "si-4": ("SI-4", "System Monitoring"),
}


def _element(element_id: str, name: str, kind: ElementKind, layer: Layer,
             subkind: Optional[RequirementSubkind] = None, sub_elements: Optional[List[Element]] = None,
             **properties: str) -> Element:
    return Element(id=element_id, name=name, kind=kind, subkind=subkind, layer_tags={layer},
                   properties=properties, sub_elements=sub_elements or [])


def _control(control_id: str, label: str, title: str) -> Element:
    return _element(control_id, f"{label} {title}", K.Requirement, Layer.Requirements,
                    subkind=RequirementSubkind.Cybersecurity, family=control_id.split("-")[0], label=label)


def _link(model: Model, kind: RelationshipKind, pairs) -> None:
    for source, target in pairs:
        model_core.add_relationship(model, kind, source, target)


def _strategy(model: Model) -> None:
    for element in (
        _element(GOAL_ID, "Fulfill Mission Objects", K.StrategicGoal, Layer.Conceptual),
        _element("objective-maintain-cybersecurity", "Maintain Cybersecurity", K.EnterpriseObjective, Layer.Conceptual),
        _element("objective-meet-compliance", "Meet Compliance Requirements", K.EnterpriseObjective, Layer.Conceptual),
        _element("driver-rmf-approach", "NIST RMF Based Cybersecurity and Compliance", K.SecurityDriver,
                 Layer.Conceptual),
    ):
        model_core.add_element(model, element)
    _link(model, R.Supports, [
        ("objective-maintain-cybersecurity", GOAL_ID),
        ("objective-meet-compliance", GOAL_ID),
        ("driver-rmf-approach", "objective-maintain-cybersecurity"),
        ("driver-rmf-approach", "objective-meet-compliance"),
    ])


def _requirements(model: Model) -> None:
    model_core.add_element(model, _element("req-isb-application", "ISB Application Functionality",
                                           K.Requirement, Layer.Requirements, subkind=RequirementSubkind.Functional))
    model_core.add_element(model, _element("req-digital-engineering", "Digital Engineering Capabilities",
                                           K.Requirement, Layer.Requirements, subkind=RequirementSubkind.Functional))
    model_core.add_element(model, _element(RMF_ROOT_ID, "NIST RMF", K.Requirement, Layer.Requirements,
                                           subkind=RequirementSubkind.Cybersecurity))
    for control_id, (label, title) in CONTROLS.items():
        model_core.add_element(model, _control(control_id, label, title))
    model_core.add_element(model, _control("ac-2.1", "AC-2(1)", "Automated System Account Management"))
    model_core.add_element(model, _element(
        "CCI-000015", "CCI-000015", K.Requirement, Layer.Requirements,
        subkind=RequirementSubkind.DerivedCybersecurity,
        definition="The organization employs automated mechanisms to support the information system "
                   "account management functions."))

    _link(model, R.DerivedFrom, [
        ("req-isb-application", GOAL_ID),
        ("req-digital-engineering", GOAL_ID),
        (RMF_ROOT_ID, "objective-maintain-cybersecurity"),
        (RMF_ROOT_ID, "objective-meet-compliance"),
        ("ac-2.1", "ac-2"),
        ("CCI-000015", "ac-2.1"),
    ])
    _link(model, R.DerivedFrom, [(control_id, RMF_ROOT_ID) for control_id in CONTROLS])


def _applications(model: Model) -> None:
    app = Layer.Application
    for element in (
        _element("isb-client-app", "ISB Client Application", K.ApplicationComponent, app,
                 port="443", protocol="https"),
        _element("isb-server-app", "ISB Server Application", K.ApplicationComponent, app,
                 port="8443", protocol="https"),
        _element("ad-ds", "Active Directory Domain Services", K.Service, app, port="389", protocol="ldap"),
        _element("auth-services", "Authentication Services", K.Service, app, port="88", protocol="kerberos"),
        _element("siem-app", "SIEM", K.ApplicationComponent, app, port="514", protocol="syslog"),
        _element("vuln-scanner-app", "Vulnerability Scanner", K.ApplicationComponent, app),
        _element("monitoring-app", "Network Monitoring", K.ApplicationComponent, app),
        _element("plm-app", "Product Lifecycle Management", K.ApplicationComponent, app),
        _element("dtw-service", "Digital Twin Service", K.Service, app),
        _element("dth-service", "Digital Thread Service", K.Service, app),
        _element("mbse-server-app", "MBSE Model Server", K.ApplicationComponent, app),
    ):
        model_core.add_element(model, element)

    _link(model, R.Supports, [
        ("auth-services", "isb-client-app"),
        ("auth-services", "isb-server-app"),
        ("siem-app", "isb-server-app"),
        ("ad-ds", "auth-services"),
    ])
    _link(model, R.Realizes, [
        ("isb-client-app", "req-isb-application"),
        ("isb-server-app", "req-isb-application"),
        ("ad-ds", "ac-2"),
        ("auth-services", "ia-2"),
        ("siem-app", "au-2"),
        ("vuln-scanner-app", "ra-5"),
        ("monitoring-app", "si-4"),
        ("plm-app", "req-digital-engineering"),
        ("dtw-service", "req-digital-engineering"),
        ("dth-service", "req-digital-engineering"),
        ("mbse-server-app", "req-digital-engineering"),
    ])
    _link(model, R.ExchangesWith, [
        ("isb-client-app", "isb-server-app"),
        ("isb-client-app", "auth-services"),
        ("isb-server-app", "auth-services"),
        ("auth-services", "ad-ds"),
        ("isb-server-app", "siem-app"),
    ])
    _link(model, R.ExchangesWith, [
        ("dth-service", peer)
        for peer in ("monitoring-app", "siem-app", "vuln-scanner-app", "plm-app", "dtw-service", "mbse-server-app")
    ])


def _technology(model: Model) -> None:
    tech = Layer.Technology
    switch_config = _element(SWITCH_CONFIG_ID, "Switch Port Security Configuration", K.ConfigurationItem, tech,
                             port_security="enabled", unused_ports="shutdown")
    for element in (
        _element("windows-workstation", "Windows Workstation", K.TechnologyNode, tech, match_key="isb-ws01"),
        _element("network-switch", "Network Switch", K.NetworkDevice, tech,
                 sub_elements=[switch_config], match_key="isb-sw01"),
        _element("app-server", "Windows Server Application Server", K.TechnologyNode, tech, match_key="isb-app01"),
        _element("domain-controller", "Windows Server Domain Controller", K.TechnologyNode, tech,
                 match_key="isb-dc01"),
        _element("security-server", "Windows Server Security Server", K.TechnologyNode, tech,
                 match_key="isb-sec01"),
    ):
        model_core.add_element(model, element)

    model_core.add_stereotype(model, {
        "name": SERVER_STEREOTYPE,
        "applies_to": K.TechnologyNode,
        "default_properties": {"os": "Windows Server 2022"},
        "baseline_sub_elements": [
            _element("audit-policy", "Audit Policy Baseline", K.ConfigurationItem, tech,
                     audit_logon_events="success,failure"),
        ],
    })
    for server in ("app-server", "domain-controller", "security-server"):
        model_core.assign_stereotype(model, server, SERVER_STEREOTYPE)

    model_core.add_relationship(model, R.AssignedConfiguration, "network-switch", SWITCH_CONFIG_ID)
    _link(model, R.Satisfies, [(SWITCH_CONFIG_ID, "cm-6"), (SWITCH_CONFIG_ID, "cm-7")])
    _link(model, R.Contains, [
        ("windows-workstation", "isb-client-app"),
        ("app-server", "isb-server-app"),
        ("app-server", "plm-app"),
        ("app-server", "dtw-service"),
        ("app-server", "dth-service"),
        ("app-server", "mbse-server-app"),
        ("domain-controller", "ad-ds"),
        ("domain-controller", "auth-services"),
        ("security-server", "siem-app"),
        ("security-server", "vuln-scanner-app"),
        ("security-server", "monitoring-app"),
    ])
    _link(model, R.ConnectsTo, [
        (host, "network-switch")
        for host in ("windows-workstation", "app-server", "domain-controller", "security-server")
    ])
    model_core.add_relationship(model, R.AllocatedTo, "ia-2", "domain-controller")


def _views(model: Model) -> None:
    create_view(model, "Conceptual/Strategic View", Layer.Conceptual,
                [GOAL_ID, "objective-maintain-cybersecurity", "objective-meet-compliance"],
                {"include_edge_kinds": [R.Supports]}, view_id=CONCEPTUAL_VIEW_ID)
    create_view(model, "Top Level Requirements View", Layer.Requirements,
                [GOAL_ID, "req-isb-application", "req-digital-engineering", RMF_ROOT_ID],
                {"include_edge_kinds": [R.DerivedFrom]}, view_id="top-level-requirements")
    create_view(model, "ISB Application View", Layer.Application,
                ["isb-client-app", "isb-server-app", "req-isb-application"],
                {"show_properties": ["port", "protocol"], "include_edge_kinds": [R.Realizes, R.ExchangesWith]},
                view_id="isb-application")
    create_view(model, "Authentication and Logging Application View", Layer.Application,
                ["isb-client-app", "isb-server-app", "auth-services", "siem-app"],
                {"show_properties": ["port", "protocol"], "include_edge_kinds": [R.ExchangesWith, R.Supports]},
                view_id="auth-logging-application")
    create_view(model, "Authentication and Logging Technology View", Layer.Technology,
                ["windows-workstation", "app-server", "domain-controller", "security-server"],
                {"show_properties": ["match_key"], "include_edge_kinds": [R.ConnectsTo]},
                view_id="auth-logging-technology")
    create_view(model, "Switch Configuration View", Layer.Technology,
                ["network-switch", "cm-6", "cm-7"],
                {"show_properties": ["port_security", "unused_ports"], "show_sub_elements": True,
                 "include_edge_kinds": [R.AssignedConfiguration, R.Satisfies]},
                view_id="switch-configuration")


def build_isb_model() -> Model:
    model = model_core.create_model(MODEL_NAME)
    _strategy(model)
    _requirements(model)
    _applications(model)
    _technology(model)
    _views(model)
    return model
