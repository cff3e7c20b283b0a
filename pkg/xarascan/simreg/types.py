import hashlib
import json
import typing as t
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from enum import Enum, unique

from ..platform import DEFAULT_PLATFORM, Platform
from ..rules.builtin import RESERVED_SCHEMES


SYSTEM_TEAM = "apple-system"
RESERVED_BID_PREFIX = "com.apple"

Attributes = t.Tuple[t.Tuple[str, str], ...]


@unique
class Entitlement(str, Enum):
    network = "network"
    ipc_client = "ipc-client"

    @classmethod
    def choices(cls) -> t.Tuple[str, ...]:
        return tuple(member.value for member in cls)

    def __str__(self) -> str:
        return self.value


@unique
class Permission(str, Enum):
    read = "read"
    write = "write"

    def __str__(self) -> str:
        return self.value


ALL_PERMISSIONS = frozenset(Permission)


def attributes(mapping: t.Mapping[str, str]) -> Attributes:
    """ Canonical, hashable form of a keychain attribute map """
    return tuple(sorted((str(k), str(v)) for k, v in mapping.items()))


def is_valid_bid(bid: str) -> bool:
    return bool(bid) and all(bid.split("."))


@dataclass(frozen=True)
class AppManifest:
    app_id: str
    team_id: str
    bid: str
    sub_bids: t.Tuple[str, ...] = ()
    schemes: t.Tuple[str, ...] = ()
    entitlements: t.FrozenSet[Entitlement] = frozenset()

    @property
    def is_system(self) -> bool:
        return self.team_id == SYSTEM_TEAM

    @property
    def bids(self) -> t.Tuple[str, ...]:
        return (self.bid,) + tuple(
            bid for bid in self.sub_bids if bid != self.bid
        )

    def to_dict(self) -> t.Dict[str, t.Any]:
        return OrderedDict((
            ("app", self.app_id),
            ("team", self.team_id),
            ("bid", self.bid),
            ("sub_bids", list(self.sub_bids)),
            ("schemes", list(self.schemes)),
            ("entitlements", sorted(e.value for e in self.entitlements)),
        ))


class AclEntry(t.NamedTuple):
    app_id: str
    permissions: t.FrozenSet[Permission] = ALL_PERMISSIONS

    def __str__(self) -> str:
        if self.permissions == ALL_PERMISSIONS:
            return self.app_id
        flags = "".join(sorted(p.value[0] for p in self.permissions))
        return "{}:{}".format(self.app_id, flags)


@dataclass(frozen=True)
class KeychainItem:
    handle: int
    attributes: Attributes
    secret: str
    acl: t.Tuple[AclEntry, ...]
    creator: str

    @property
    def members(self) -> t.Tuple[str, ...]:
        return tuple(entry.app_id for entry in self.acl)

    def allows(self, app_id: str, permission: Permission) -> bool:
        return any(
            entry.app_id == app_id and permission in entry.permissions
            for entry in self.acl
        )

    def matches(self, query: Attributes) -> bool:
        """ Every queried attribute is present with the same value """
        own = dict(self.attributes)
        return all(own.get(name) == value for name, value in query)

    def to_dict(self) -> t.Dict[str, t.Any]:
        return OrderedDict((
            ("handle", self.handle),
            ("attributes", OrderedDict(self.attributes)),
            ("secret", self.secret),
            ("acl", [str(entry) for entry in self.acl]),
            ("creator", self.creator),
        ))


@dataclass(frozen=True)
class Container:
    bid: str
    acl: t.Tuple[str, ...] = ()
    files: t.Tuple[t.Tuple[str, str], ...] = ()

    def read(self, path: str) -> t.Optional[str]:
        return dict(self.files).get(path)

    def write(self, path: str, data: str) -> "Container":
        files = dict(self.files)
        files[path] = data
        return replace(self, files=tuple(sorted(files.items())))

    def to_dict(self) -> t.Dict[str, t.Any]:
        return OrderedDict((
            ("acl", list(self.acl)),
            ("files", OrderedDict(self.files)),
        ))


@unique
class SyslogKind(str, Enum):
    register_failed = "register-failed"

    def __str__(self) -> str:
        return self.value


class SyslogEntry(t.NamedTuple):
    kind: t.Union[SyslogKind, str]
    subject: str
    app_id: str
    owner: t.Optional[str] = None

    def __str__(self) -> str:
        return "{}({}, {})".format(self.kind, self.subject, self.app_id)


@dataclass(frozen=True)
class SysState:
    """
    Value-semantic snapshot of every registry. Nothing mutates a state:
    :func:`xarascan.simreg.state.apply` derives a new one per event.
    """

    platform: Platform = DEFAULT_PLATFORM
    store: t.Tuple[AppManifest, ...] = ()
    installed: t.Tuple[str, ...] = ()
    keychain: t.Tuple[KeychainItem, ...] = ()
    next_handle: int = 1
    containers: t.Tuple[Container, ...] = ()
    # claimants per scheme in registration order
    scheme_claims: t.Tuple[t.Tuple[str, t.Tuple[str, ...]], ...] = ()
    ns_names: t.Tuple[t.Tuple[str, str], ...] = ()
    ports: t.Tuple[t.Tuple[int, str], ...] = ()
    syslog: t.Tuple[SyslogEntry, ...] = ()
    received: t.Tuple[t.Tuple[str, t.Tuple[str, ...]], ...] = ()

    def evolve(self, **changes: t.Any) -> "SysState":
        return replace(self, **changes)

    def manifest(self, app_id: str) -> t.Optional[AppManifest]:
        for manifest in self.store:
            if manifest.app_id == app_id:
                return manifest
        return None

    def is_installed(self, app_id: str) -> bool:
        return app_id in self.installed

    def item(self, handle: int) -> t.Optional[KeychainItem]:
        for item in self.keychain:
            if item.handle == handle:
                return item
        return None

    def container(self, bid: str) -> t.Optional[Container]:
        for container in self.containers:
            if container.bid == bid:
                return container
        return None

    def claimants(self, scheme: str) -> t.Tuple[str, ...]:
        return dict(self.scheme_claims).get(scheme.lower(), ())

    def scheme_owner(self, scheme: str) -> t.Optional[str]:
        """
        The app a URL of ``scheme`` is routed to: the first installed
        claimant on OS X and the last one on iOS. Reserved system schemes
        only go to system apps.
        """
        scheme = scheme.lower()
        candidates = [
            app_id for app_id in self.claimants(scheme)
            if app_id in self.installed
        ]
        if scheme in RESERVED_SCHEMES:
            candidates = [
                app_id for app_id in candidates
                if getattr(self.manifest(app_id), "is_system", False)
            ]
        if not candidates:
            return None
        if self.platform is Platform.ios:
            return candidates[-1]
        return candidates[0]

    @property
    def schemes(self) -> t.Dict[str, str]:
        result = OrderedDict()     # type: t.Dict[str, str]
        for scheme, _ in self.scheme_claims:
            owner = self.scheme_owner(scheme)
            if owner is not None:
                result[scheme] = owner
        return result

    def ns_owner(self, name: str) -> t.Optional[str]:
        return dict(self.ns_names).get(name)

    def port_owner(self, port: int) -> t.Optional[str]:
        return dict(self.ports).get(port)

    def received_by(self, app_id: str) -> t.Tuple[str, ...]:
        return dict(self.received).get(app_id, ())

    def to_dict(self) -> t.Dict[str, t.Any]:
        return OrderedDict((
            ("platform", self.platform.value),
            ("store", [manifest.to_dict() for manifest in self.store]),
            ("installed", list(self.installed)),
            ("keychain", [item.to_dict() for item in self.keychain]),
            ("next_handle", self.next_handle),
            ("containers", OrderedDict(
                (c.bid, c.to_dict()) for c in self.containers
            )),
            ("scheme_claims", OrderedDict(
                (scheme, list(apps)) for scheme, apps in self.scheme_claims
            )),
            ("schemes", self.schemes),
            ("ns_names", OrderedDict(self.ns_names)),
            ("ports", OrderedDict(
                (str(port), owner) for port, owner in self.ports
            )),
            ("syslog", [
                OrderedDict((
                    ("kind", str(entry.kind)),
                    ("subject", entry.subject),
                    ("app", entry.app_id),
                    ("owner", entry.owner),
                ))
                for entry in self.syslog
            ]),
            ("received", OrderedDict(
                (app_id, list(items)) for app_id, items in self.received
            )),
        ))

    def digest(self) -> str:
        """ SHA-256 of the canonical JSON form """
        payload = json.dumps(
            self.to_dict(), sort_keys=True, separators=(",", ":"),
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class HandleRef(t.NamedTuple):
    """ A keychain handle bound by an earlier lookup of a scenario """
    label: str

    def __str__(self) -> str:
        return "@{}".format(self.label)


Handle = t.Union[int, HandleRef]


@dataclass(frozen=True)
class Event:
    app_id: str

    @property
    def command(self) -> str:
        return _COMMANDS[type(self)]


@dataclass(frozen=True)
class VetApp(Event):
    manifest: AppManifest = field(default=None)    # type: ignore


@dataclass(frozen=True)
class Install(Event):
    pass


@dataclass(frozen=True)
class Uninstall(Event):
    pass


@dataclass(frozen=True)
class KcCreate(Event):
    attributes: Attributes = ()
    secret: str = ""
    acl: t.Tuple[AclEntry, ...] = ()


@dataclass(frozen=True)
class KcFind(Event):
    attributes: Attributes = ()
    label: t.Optional[str] = None


@dataclass(frozen=True)
class KcUpdate(Event):
    handle: Handle = 0
    secret: str = ""


@dataclass(frozen=True)
class KcDelete(Event):
    attributes: Attributes = ()


@dataclass(frozen=True)
class KcReadAttrs(Event):
    attributes: Attributes = ()


@dataclass(frozen=True)
class KcRead(Event):
    handle: Handle = 0


@dataclass(frozen=True)
class RegisterNsName(Event):
    name: str = ""


@dataclass(frozen=True)
class ConnectNsName(Event):
    name: str = ""
    message: t.Optional[str] = None


@dataclass(frozen=True)
class BindPort(Event):
    port: int = 0


@dataclass(frozen=True)
class ConnectPort(Event):
    port: int = 0
    message: t.Optional[str] = None


@dataclass(frozen=True)
class OpenUrl(Event):
    url: str = ""


@dataclass(frozen=True)
class ContainerWrite(Event):
    bid: str = ""
    path: str = ""
    data: str = ""


@dataclass(frozen=True)
class ContainerRead(Event):
    bid: str = ""
    path: str = ""


_COMMANDS = {
    VetApp: "vet",
    Install: "install",
    Uninstall: "uninstall",
    KcCreate: "kc-create",
    KcFind: "kc-find",
    KcUpdate: "kc-update",
    KcDelete: "kc-delete",
    KcReadAttrs: "kc-attrs",
    KcRead: "kc-read",
    RegisterNsName: "ns-register",
    ConnectNsName: "ns-connect",
    BindPort: "port-bind",
    ConnectPort: "port-connect",
    OpenUrl: "open-url",
    ContainerWrite: "cwrite",
    ContainerRead: "cread",
}   # type: t.Dict[t.Type[Event], str]


@unique
class OutcomeStatus(str, Enum):
    ok = "Ok"
    denied = "Denied"
    conflict = "Conflict"

    def __str__(self) -> str:
        return self.value


class Outcome(t.NamedTuple):
    status: OutcomeStatus
    # policy name for Denied, conflict details for Conflict
    detail: str = ""
    payload: t.Any = None

    @classmethod
    def ok(cls, payload: t.Any = None) -> "Outcome":
        return cls(OutcomeStatus.ok, "", payload)

    @classmethod
    def denied(cls, reason: str) -> "Outcome":
        return cls(OutcomeStatus.denied, reason)

    @classmethod
    def conflict(cls, details: str) -> "Outcome":
        return cls(OutcomeStatus.conflict, details)

    @property
    def is_ok(self) -> bool:
        return self.status is OutcomeStatus.ok

    def __str__(self) -> str:
        if self.status is OutcomeStatus.ok:
            if self.payload is None:
                return "Ok"
            return "Ok({})".format(self.payload)
        return "{}({})".format(self.status, self.detail)

    def to_dict(self) -> t.Dict[str, t.Any]:
        return OrderedDict((
            ("status", self.status.value),
            ("detail", self.detail),
            ("payload", self.payload),
        ))


__all__ = (
    "ALL_PERMISSIONS",
    "AclEntry",
    "AppManifest",
    "Attributes",
    "BindPort",
    "ConnectNsName",
    "ConnectPort",
    "Container",
    "ContainerRead",
    "ContainerWrite",
    "Entitlement",
    "Event",
    "Handle",
    "HandleRef",
    "Install",
    "KcCreate",
    "KcDelete",
    "KcFind",
    "KcRead",
    "KcReadAttrs",
    "KcUpdate",
    "KeychainItem",
    "OpenUrl",
    "Outcome",
    "OutcomeStatus",
    "Permission",
    "RESERVED_BID_PREFIX",
    "RegisterNsName",
    "SYSTEM_TEAM",
    "SyslogEntry",
    "SyslogKind",
    "SysState",
    "Uninstall",
    "VetApp",
    "attributes",
    "is_valid_bid",
)
