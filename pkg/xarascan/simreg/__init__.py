from .exceptions import (
    MalformedEvent, ScenarioSyntaxError, SimulationError,
)
from .scenario import (
    Scenario, Trace, TraceStep, format_event, parse_scenario, render_trace,
    run_scenario, trace_to_dict,
)
from .state import apply
from .types import (
    SYSTEM_TEAM, AclEntry, AppManifest, BindPort, ConnectNsName, ConnectPort,
    Container, ContainerRead, ContainerWrite, Entitlement, Event, HandleRef,
    Install, KcCreate, KcDelete, KcFind, KcRead, KcReadAttrs, KcUpdate,
    KeychainItem, OpenUrl, Outcome, OutcomeStatus, Permission,
    RegisterNsName, SyslogEntry, SyslogKind, SysState, Uninstall, VetApp,
    attributes,
)
from .vetting import vet_app


__all__ = (
    "AclEntry",
    "AppManifest",
    "BindPort",
    "ConnectNsName",
    "ConnectPort",
    "Container",
    "ContainerRead",
    "ContainerWrite",
    "Entitlement",
    "Event",
    "HandleRef",
    "Install",
    "KcCreate",
    "KcDelete",
    "KcFind",
    "KcRead",
    "KcReadAttrs",
    "KcUpdate",
    "KeychainItem",
    "MalformedEvent",
    "OpenUrl",
    "Outcome",
    "OutcomeStatus",
    "Permission",
    "RegisterNsName",
    "SYSTEM_TEAM",
    "Scenario",
    "ScenarioSyntaxError",
    "SimulationError",
    "SyslogEntry",
    "SyslogKind",
    "SysState",
    "Trace",
    "TraceStep",
    "Uninstall",
    "VetApp",
    "apply",
    "attributes",
    "format_event",
    "parse_scenario",
    "render_trace",
    "run_scenario",
    "trace_to_dict",
    "vet_app",
)
