"""
Scenario files and traces.

A scenario is a line-oriented script, one event per line::

    # platform: ios
    vet victim team=T1 bid=com.example.victim schemes=victim
    install victim
    kc-find victim service=example as=item
    kc-update victim @item secret=hunter2

Lines are split like a shell would (``shlex``), ``#`` starts a comment.
Every command takes the acting app first, then its positional arguments,
then ``key=value`` options.
"""
import json
import logging
import re
import shlex
import typing as t
from collections import OrderedDict
from dataclasses import dataclass, field

from ..platform import DEFAULT_PLATFORM, Platform
from ..verdict.render import OutputFormat
from .exceptions import MalformedEvent, ScenarioSyntaxError
from .state import apply
from .types import (
    ALL_PERMISSIONS, AclEntry, AppManifest, BindPort, ConnectNsName,
    ConnectPort, ContainerRead, ContainerWrite, Entitlement, Event, Handle,
    HandleRef, Install, KcCreate, KcDelete, KcFind, KcRead, KcReadAttrs,
    KcUpdate, OpenUrl, Outcome, Permission, RegisterNsName, SysState,
    Uninstall, VetApp, attributes,
)


log = logging.getLogger(__name__)

PLATFORM_HEADER = re.compile(r"^\s*#\s*platform:\s*(?P<platform>\S+)\s*$")

Options = t.Dict[str, str]
Builder = t.Callable[[str, t.List[str], Options], Event]


class _Command(t.NamedTuple):
    positional: int
    build: Builder
    # option keys with a meaning of their own, everything else is attributes
    known: t.FrozenSet[str] = frozenset()
    attributes: bool = False


def _split_list(value: str) -> t.Tuple[str, ...]:
    return tuple(part for part in value.split(",") if part)


_PERMISSION_FLAGS = {"r": Permission.read, "w": Permission.write}


def parse_acl(value: str) -> t.Tuple[AclEntry, ...]:
    """ ``app[:r|w|rw],...`` into ACL entries, full access by default """
    entries = []
    for part in _split_list(value):
        app_id, _, flags = part.partition(":")
        if not flags:
            entries.append(AclEntry(app_id, ALL_PERMISSIONS))
            continue
        try:
            permissions = frozenset(_PERMISSION_FLAGS[f] for f in flags)
        except KeyError as e:
            raise ValueError(
                "unknown permission {} in {!r}".format(e, part),
            ) from None
        entries.append(AclEntry(app_id, permissions))
    return tuple(entries)


def parse_handle(token: str) -> Handle:
    if token.startswith("@"):
        if len(token) == 1:
            raise ValueError("empty handle label")
        return HandleRef(token[1:])
    return int(token)


def _vet(app_id: str, args: t.List[str], options: Options) -> Event:
    if "team" not in options or "bid" not in options:
        raise ValueError("vet needs team= and bid=")
    entitlements = frozenset(
        Entitlement(value)
        for value in _split_list(options.get("entitlements", ""))
    )
    manifest = AppManifest(
        app_id=app_id,
        team_id=options["team"],
        bid=options["bid"],
        sub_bids=_split_list(options.get("sub", "")),
        schemes=_split_list(options.get("schemes", "")),
        entitlements=entitlements,
    )
    return VetApp(app_id, manifest)


def _attrs(options: Options, reserved: t.Iterable[str]) -> t.Any:
    skip = set(reserved)
    return attributes({k: v for k, v in options.items() if k not in skip})


def _kc_create(app_id: str, args: t.List[str], options: Options) -> Event:
    if "secret" not in options:
        raise ValueError("kc-create needs secret=")
    return KcCreate(
        app_id,
        attributes=_attrs(options, ("secret", "acl")),
        secret=options["secret"],
        acl=parse_acl(options.get("acl", "")),
    )


def _kc_update(app_id: str, args: t.List[str], options: Options) -> Event:
    if "secret" not in options:
        raise ValueError("kc-update needs secret=")
    return KcUpdate(app_id, parse_handle(args[0]), options["secret"])


_COMMANDS = {
    "vet": _Command(0, _vet, frozenset(
        ("team", "bid", "sub", "schemes", "entitlements"),
    )),
    "install": _Command(0, lambda app, a, o: Install(app)),
    "uninstall": _Command(0, lambda app, a, o: Uninstall(app)),
    "kc-create": _Command(0, _kc_create, attributes=True),
    "kc-find": _Command(0, lambda app, a, o: KcFind(
        app, _attrs(o, ("as",)), o.get("as"),
    ), attributes=True),
    "kc-update": _Command(1, _kc_update, frozenset(("secret",))),
    "kc-read": _Command(1, lambda app, a, o: KcRead(app, parse_handle(a[0]))),
    "kc-delete": _Command(0, lambda app, a, o: KcDelete(
        app, _attrs(o, ()),
    ), attributes=True),
    "kc-attrs": _Command(0, lambda app, a, o: KcReadAttrs(
        app, _attrs(o, ()),
    ), attributes=True),
    "ns-register": _Command(1, lambda app, a, o: RegisterNsName(app, a[0])),
    "ns-connect": _Command(1, lambda app, a, o: ConnectNsName(
        app, a[0], o.get("message"),
    ), frozenset(("message",))),
    "port-bind": _Command(1, lambda app, a, o: BindPort(app, int(a[0]))),
    "port-connect": _Command(1, lambda app, a, o: ConnectPort(
        app, int(a[0]), o.get("message"),
    ), frozenset(("message",))),
    "open-url": _Command(1, lambda app, a, o: OpenUrl(app, a[0])),
    "cwrite": _Command(3, lambda app, a, o: ContainerWrite(
        app, a[0], a[1], a[2],
    )),
    "cread": _Command(2, lambda app, a, o: ContainerRead(app, a[0], a[1])),
}   # type: t.Dict[str, _Command]


def parse_event(tokens: t.Sequence[str]) -> Event:
    """ Build one event from the tokens of a scenario line """
    if len(tokens) < 2:
        raise ValueError("expected a command and an app id")

    name, app_id, rest = tokens[0], tokens[1], list(tokens[2:])
    command = _COMMANDS.get(name)
    if command is None:
        raise ValueError("unknown command {!r}".format(name))
    if len(rest) < command.positional:
        raise ValueError("{} takes {} argument(s) after the app id".format(
            name, command.positional,
        ))

    args = rest[:command.positional]
    options = OrderedDict()  # type: Options
    for token in rest[command.positional:]:
        key, separator, value = token.partition("=")
        if not separator or not key:
            raise ValueError("expected key=value, got {!r}".format(token))
        if key in options:
            raise ValueError("duplicate key {!r}".format(key))
        if not command.attributes and key not in command.known:
            raise ValueError("unknown key {!r} for {}".format(key, name))
        options[key] = value

    return command.build(app_id, args, options)


class Scenario(t.NamedTuple):
    events: t.Tuple[Event, ...] = ()
    platform: t.Optional[Platform] = None
    # source line of every event
    lines: t.Tuple[int, ...] = ()
    source: str = "<scenario>"


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    events = []     # type: t.List[Event]
    lines = []      # type: t.List[int]
    platform = None     # type: t.Optional[Platform]

    for number, raw in enumerate(text.split("\n"), start=1):
        raw = raw.rstrip("\r")
        header = PLATFORM_HEADER.match(raw)
        if header is not None:
            try:
                platform = Platform(header.group("platform"))
            except ValueError:
                raise ScenarioSyntaxError(
                    "unknown platform {!r}".format(header.group("platform")),
                    line=number, source=source,
                ) from None
            continue

        try:
            tokens = shlex.split(raw, comments=True)
            if not tokens:
                continue
            events.append(parse_event(tokens))
        except ValueError as e:
            raise ScenarioSyntaxError(
                str(e), line=number, source=source,
            ) from e
        lines.append(number)

    log.debug("Parsed %d event(s) from %s", len(events), source)
    return Scenario(tuple(events), platform, tuple(lines), source)


def _options(pairs: t.Iterable[t.Tuple[str, str]]) -> t.List[str]:
    return [shlex.quote("{}={}".format(k, v)) for k, v in pairs]


def format_event(event: Event) -> str:
    """ The scenario line producing ``event`` """
    words = [event.command, shlex.quote(event.app_id)]

    if isinstance(event, VetApp):
        manifest = event.manifest
        pairs = [("team", manifest.team_id), ("bid", manifest.bid)]
        if manifest.sub_bids:
            pairs.append(("sub", ",".join(manifest.sub_bids)))
        if manifest.schemes:
            pairs.append(("schemes", ",".join(manifest.schemes)))
        if manifest.entitlements:
            pairs.append(("entitlements", ",".join(
                sorted(e.value for e in manifest.entitlements),
            )))
        words.extend(_options(pairs))
    elif isinstance(event, KcCreate):
        pairs = list(event.attributes) + [("secret", event.secret)]
        if event.acl:
            pairs.append(("acl", ",".join(str(e) for e in event.acl)))
        words.extend(_options(pairs))
    elif isinstance(event, KcFind):
        pairs = list(event.attributes)
        if event.label is not None:
            pairs.append(("as", event.label))
        words.extend(_options(pairs))
    elif isinstance(event, (KcDelete, KcReadAttrs)):
        words.extend(_options(event.attributes))
    elif isinstance(event, KcUpdate):
        words.append(shlex.quote(str(event.handle)))
        words.extend(_options([("secret", event.secret)]))
    elif isinstance(event, KcRead):
        words.append(shlex.quote(str(event.handle)))
    elif isinstance(event, (RegisterNsName, ConnectNsName)):
        words.append(shlex.quote(event.name))
    elif isinstance(event, (BindPort, ConnectPort)):
        words.append(str(event.port))
    elif isinstance(event, OpenUrl):
        words.append(shlex.quote(event.url))
    elif isinstance(event, (ContainerWrite, ContainerRead)):
        words.extend((shlex.quote(event.bid), shlex.quote(event.path)))
        if isinstance(event, ContainerWrite):
            words.append(shlex.quote(event.data))

    message = getattr(event, "message", None)
    if message is not None:
        words.extend(_options([("message", message)]))
    return " ".join(words)


class TraceStep(t.NamedTuple):
    index: int
    event: Event
    outcome: Outcome
    digest: str
    state: SysState


@dataclass(frozen=True)
class Trace:
    platform: Platform
    steps: t.Tuple[TraceStep, ...] = ()
    initial: SysState = field(default_factory=SysState)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> t.Iterator[TraceStep]:
        return iter(self.steps)

    def __getitem__(self, index: int) -> TraceStep:
        return self.steps[index]

    def before(self, index: int) -> SysState:
        """ State the event at ``index`` was applied to """
        if index == 0:
            return self.initial
        return self.steps[index - 1].state

    @property
    def final(self) -> SysState:
        if not self.steps:
            return self.initial
        return self.steps[-1].state

    @property
    def outcomes(self) -> t.Tuple[Outcome, ...]:
        return tuple(step.outcome for step in self.steps)


def _resolve(event: Event, labels: t.Mapping[str, int]) -> Event:
    handle = getattr(event, "handle", None)
    if not isinstance(handle, HandleRef):
        return event
    if handle.label not in labels:
        raise MalformedEvent("unbound handle {}".format(handle))
    if isinstance(event, KcUpdate):
        return KcUpdate(event.app_id, labels[handle.label], event.secret)
    return KcRead(event.app_id, labels[handle.label])


def run_scenario(
    events: t.Iterable[Event], platform: Platform = DEFAULT_PLATFORM,
) -> Trace:
    """
    Fold :func:`apply` over ``events`` starting from an empty system.

    Handles looked up with a label (``kc-find ... as=name``) are substituted
    into later ``@name`` references. A malformed event aborts the run with
    :class:`MalformedEvent` carrying its position.
    """
    initial = SysState(platform=Platform(platform))
    state = initial
    labels = {}     # type: t.Dict[str, int]
    steps = []      # type: t.List[TraceStep]

    for index, event in enumerate(events):
        try:
            resolved = _resolve(event, labels)
            state, outcome = apply(state, resolved)
        except MalformedEvent as e:
            raise MalformedEvent(e.message, position=index) from e

        if isinstance(event, KcFind) and event.label is not None:
            if outcome.is_ok:
                labels[event.label] = outcome.payload
            else:
                labels.pop(event.label, None)

        steps.append(
            TraceStep(index, event, outcome, state.digest(), state),
        )

    return Trace(Platform(platform), tuple(steps), initial)


def trace_to_dict(trace: Trace) -> t.Dict[str, t.Any]:
    return OrderedDict((
        ("platform", trace.platform.value),
        ("steps", [
            OrderedDict((
                ("index", step.index),
                ("event", format_event(step.event)),
                ("outcome", step.outcome.to_dict()),
                ("digest", step.digest),
            ))
            for step in trace
        ]),
        ("final", trace.final.to_dict()),
    ))


def render_trace(
    trace: Trace, output_format: t.Union[OutputFormat, str] = "text",
) -> str:
    if OutputFormat(output_format) is OutputFormat.json:
        return json.dumps(
            trace_to_dict(trace), indent=2, ensure_ascii=False,
        ) + "\n"

    lines = ["platform: {}".format(trace.platform)]
    for step in trace:
        lines.append("{:>4} {} -> {} [{}]".format(
            step.index, format_event(step.event), step.outcome,
            step.digest[:12],
        ))
    received = trace.final.received
    if received:
        lines.append("received:")
        for app_id, items in received:
            lines.extend("  {}: {}".format(app_id, item) for item in items)
    return "\n".join(lines) + "\n"


__all__ = (
    "PLATFORM_HEADER",
    "Scenario",
    "Trace",
    "TraceStep",
    "format_event",
    "parse_acl",
    "parse_event",
    "parse_handle",
    "parse_scenario",
    "render_trace",
    "run_scenario",
    "trace_to_dict",
)
