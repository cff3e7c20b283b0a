"""
Registry semantics of the simulated operating system.

Each handler takes the state before an event and returns the state after it
together with the outcome. Denied and Conflict outcomes leave the state as
it was, except that a failed name registration is logged to the syslog.
"""
import logging
import typing as t

from .exceptions import MalformedEvent
from .types import (
    AclEntry, BindPort, ConnectNsName, ConnectPort, Container, ContainerRead,
    ContainerWrite, Entitlement, Event, Install, KcCreate, KcDelete, KcFind,
    KcRead, KcReadAttrs, KcUpdate, KeychainItem, OpenUrl, Outcome, Permission,
    RegisterNsName, SyslogEntry, SyslogKind, SysState, Uninstall, VetApp,
)
from .vetting import vet_app


log = logging.getLogger(__name__)

Result = t.Tuple[SysState, Outcome]
Handler = t.Callable[[SysState, t.Any], Result]

_HANDLERS = {}  # type: t.Dict[t.Type[Event], Handler]


def handles(event_type: t.Type[Event]) -> t.Callable[[Handler], Handler]:
    def decorator(func: Handler) -> Handler:
        _HANDLERS[event_type] = func
        return func
    return decorator


def deliver(state: SysState, app_id: str, item: str) -> SysState:
    """ Record that ``app_id`` obtained ``item`` """
    received = dict(state.received)
    received[app_id] = received.get(app_id, ()) + (item,)
    return state.evolve(received=tuple(sorted(received.items())))


def _require_vetted(state: SysState, app_id: str) -> None:
    if state.manifest(app_id) is None:
        raise MalformedEvent("app {!r} was never vetted".format(app_id))


def _require_installed(state: SysState, app_id: str) -> None:
    _require_vetted(state, app_id)
    if not state.is_installed(app_id):
        raise MalformedEvent("app {!r} is not installed".format(app_id))


def _live_item(state: SysState, handle: t.Any) -> t.Optional[KeychainItem]:
    if not isinstance(handle, int):
        raise MalformedEvent("unresolved keychain handle {}".format(handle))
    return state.item(handle)


@handles(VetApp)
def _vet(state: SysState, event: VetApp) -> Result:
    if event.manifest is None or event.manifest.app_id != event.app_id:
        raise MalformedEvent(
            "manifest does not describe {!r}".format(event.app_id),
        )
    outcome = vet_app(state, event.manifest)
    if not outcome.is_ok:
        return state, outcome
    return state.evolve(store=state.store + (event.manifest,)), outcome


@handles(Install)
def _install(state: SysState, event: Install) -> Result:
    _require_vetted(state, event.app_id)
    manifest = state.manifest(event.app_id)
    assert manifest is not None

    containers = list(state.containers)
    for bid in manifest.bids:
        existing = state.container(bid)
        if existing is None:
            containers.append(Container(bid, acl=(event.app_id,)))
            continue
        if event.app_id in existing.acl:
            continue
        log.debug(
            "Container %r exists, adding %r to its ACL", bid, event.app_id,
        )
        containers[containers.index(existing)] = Container(
            bid, existing.acl + (event.app_id,), existing.files,
        )

    claims = dict(state.scheme_claims)
    for scheme in manifest.schemes:
        scheme = scheme.lower()
        history = claims.get(scheme, ())
        if event.app_id not in history:
            claims[scheme] = history + (event.app_id,)

    installed = state.installed
    if event.app_id not in installed:
        installed += (event.app_id,)

    return state.evolve(
        installed=installed,
        containers=tuple(containers),
        scheme_claims=tuple(claims.items()),
    ), Outcome.ok()


@handles(Uninstall)
def _uninstall(state: SysState, event: Uninstall) -> Result:
    _require_installed(state, event.app_id)
    app_id = event.app_id

    containers = tuple(
        Container(
            c.bid, tuple(member for member in c.acl if member != app_id),
            c.files,
        )
        for c in state.containers
    )
    claims = tuple(
        (scheme, tuple(member for member in history if member != app_id))
        for scheme, history in state.scheme_claims
    )

    return state.evolve(
        installed=tuple(a for a in state.installed if a != app_id),
        containers=containers,
        scheme_claims=tuple((s, h) for s, h in claims if h),
        ns_names=tuple((n, o) for n, o in state.ns_names if o != app_id),
        ports=tuple((p, o) for p, o in state.ports if o != app_id),
    ), Outcome.ok()


@handles(KcCreate)
def _kc_create(state: SysState, event: KcCreate) -> Result:
    _require_installed(state, event.app_id)
    for entry in event.acl:
        _require_vetted(state, entry.app_id)

    for item in state.keychain:
        if item.attributes == event.attributes:
            return state, Outcome.conflict(
                "item {} has identical attributes".format(item.handle),
            )

    acl = list(event.acl)
    if event.app_id not in (entry.app_id for entry in acl):
        acl.insert(0, AclEntry(event.app_id))

    item = KeychainItem(
        handle=state.next_handle,
        attributes=event.attributes,
        secret=event.secret,
        acl=tuple(acl),
        creator=event.app_id,
    )
    return state.evolve(
        keychain=state.keychain + (item,),
        next_handle=state.next_handle + 1,
    ), Outcome.ok(item.handle)


@handles(KcFind)
def _kc_find(state: SysState, event: KcFind) -> Result:
    _require_installed(state, event.app_id)
    # the creator plays no part in the lookup
    for item in state.keychain:
        if item.matches(event.attributes):
            return state, Outcome.ok(item.handle)
    return state, Outcome.denied("no-such-item")


@handles(KcReadAttrs)
def _kc_read_attrs(state: SysState, event: KcReadAttrs) -> Result:
    _require_installed(state, event.app_id)
    found = [
        dict(item.attributes) for item in state.keychain
        if item.matches(event.attributes)
    ]
    return state, Outcome.ok(found)


@handles(KcUpdate)
def _kc_update(state: SysState, event: KcUpdate) -> Result:
    _require_installed(state, event.app_id)
    item = _live_item(state, event.handle)
    if item is None:
        return state, Outcome.denied("no-such-item")
    if not item.allows(event.app_id, Permission.write):
        return state, Outcome.denied("acl-write")

    updated = KeychainItem(
        item.handle, item.attributes, event.secret, item.acl, item.creator,
    )
    keychain = tuple(
        updated if other.handle == item.handle else other
        for other in state.keychain
    )
    return state.evolve(keychain=keychain), Outcome.ok(item.handle)


@handles(KcRead)
def _kc_read(state: SysState, event: KcRead) -> Result:
    _require_installed(state, event.app_id)
    item = _live_item(state, event.handle)
    if item is None:
        return state, Outcome.denied("no-such-item")
    if not item.allows(event.app_id, Permission.read):
        return state, Outcome.denied("acl-read")
    state = deliver(
        state, event.app_id, "keychain:{}".format(item.secret),
    )
    return state, Outcome.ok(item.secret)


@handles(KcDelete)
def _kc_delete(state: SysState, event: KcDelete) -> Result:
    _require_installed(state, event.app_id)
    doomed = [
        item.handle for item in state.keychain
        if item.matches(event.attributes)
    ]
    if not doomed:
        return state, Outcome.denied("no-such-item")
    keychain = tuple(
        item for item in state.keychain if item.handle not in doomed
    )
    return state.evolve(keychain=keychain), Outcome.ok(len(doomed))


@handles(RegisterNsName)
def _ns_register(state: SysState, event: RegisterNsName) -> Result:
    _require_installed(state, event.app_id)
    owner = state.ns_owner(event.name)
    if owner == event.app_id:
        return state, Outcome.ok()
    if owner is not None:
        entry = SyslogEntry(
            SyslogKind.register_failed, event.name, event.app_id, owner,
        )
        log.debug("Syslog: %s", entry)
        return state.evolve(syslog=state.syslog + (entry,)), Outcome.conflict(
            "{} is registered by {}".format(event.name, owner),
        )
    return state.evolve(
        ns_names=state.ns_names + ((event.name, event.app_id),),
    ), Outcome.ok()


@handles(ConnectNsName)
def _ns_connect(state: SysState, event: ConnectNsName) -> Result:
    _require_installed(state, event.app_id)
    owner = state.ns_owner(event.name)
    if owner is None:
        return state, Outcome.denied("no-such-name")
    if event.message is not None:
        state = deliver(state, owner, "ns:{}:{}".format(
            event.name, event.message,
        ))
    return state, Outcome.ok(owner)


@handles(BindPort)
def _port_bind(state: SysState, event: BindPort) -> Result:
    _require_installed(state, event.app_id)
    manifest = state.manifest(event.app_id)
    assert manifest is not None
    if Entitlement.network not in manifest.entitlements:
        return state, Outcome.denied("network-entitlement")
    owner = state.port_owner(event.port)
    if owner == event.app_id:
        return state, Outcome.ok()
    if owner is not None:
        # no trace in the syslog for ports
        return state, Outcome.conflict(
            "port {} is bound by {}".format(event.port, owner),
        )
    return state.evolve(
        ports=state.ports + ((event.port, event.app_id),),
    ), Outcome.ok()


@handles(ConnectPort)
def _port_connect(state: SysState, event: ConnectPort) -> Result:
    _require_installed(state, event.app_id)
    owner = state.port_owner(event.port)
    if owner is None:
        return state, Outcome.denied("no-listener")
    if event.message is not None:
        state = deliver(state, owner, "port:{}:{}".format(
            event.port, event.message,
        ))
    return state, Outcome.ok(owner)


def url_scheme(url: str) -> str:
    scheme, separator, _ = url.partition(":")
    if not separator:
        return ""
    return scheme.lower()


@handles(OpenUrl)
def _open_url(state: SysState, event: OpenUrl) -> Result:
    _require_installed(state, event.app_id)
    scheme = url_scheme(event.url)
    owner = state.scheme_owner(scheme) if scheme else None
    if owner is None:
        return state, Outcome.denied("no-handler")
    return deliver(state, owner, "url:{}".format(event.url)), Outcome.ok(owner)


def _container_for(
    state: SysState, app_id: str, bid: str,
) -> t.Tuple[t.Optional[Container], t.Optional[Outcome]]:
    container = state.container(bid)
    if container is None:
        return None, Outcome.denied("no-such-container")
    if app_id not in container.acl:
        return None, Outcome.denied("container-acl")
    return container, None


@handles(ContainerWrite)
def _container_write(state: SysState, event: ContainerWrite) -> Result:
    _require_installed(state, event.app_id)
    container, refusal = _container_for(state, event.app_id, event.bid)
    if container is None:
        return state, refusal   # type: ignore
    updated = container.write(event.path, event.data)
    containers = tuple(
        updated if c.bid == container.bid else c for c in state.containers
    )
    return state.evolve(containers=containers), Outcome.ok()


@handles(ContainerRead)
def _container_read(state: SysState, event: ContainerRead) -> Result:
    _require_installed(state, event.app_id)
    container, refusal = _container_for(state, event.app_id, event.bid)
    if container is None:
        return state, refusal   # type: ignore
    data = container.read(event.path)
    if data is None:
        return state, Outcome.denied("no-such-file")
    state = deliver(state, event.app_id, "container:{}/{}:{}".format(
        event.bid, event.path, data,
    ))
    return state, Outcome.ok(data)


def apply(state: SysState, event: Event) -> Result:
    """
    Run ``event`` against ``state``.

    Returns the following state and the outcome of the event. Events that do
    not fit the state (unknown apps, acting apps that are not installed,
    unresolved handles) raise :class:`MalformedEvent`.
    """
    handler = _HANDLERS.get(type(event))
    if handler is None:
        raise MalformedEvent("unsupported event {!r}".format(event))

    new_state, outcome = handler(state, event)
    log.debug("%s %s -> %s", event.command, event.app_id, outcome)
    return new_state, outcome


__all__ = ("apply", "deliver", "url_scheme")
