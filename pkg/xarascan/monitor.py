"""
Runtime scanner watching the simulated system for hijack indicators.

Three sources are watched, each by its own handler: new keychain items and
their ACLs, app installations (declared schemes and bundle ids), and the
syslog (failed name registrations). Contention on network ports leaves no
trace in any of them and is not reported.
"""
import json
import logging
import shlex
import typing as t
from collections import OrderedDict
from enum import Enum, unique

from aiomisc import Signal

from .exceptions import XaraError
from .platform import Platform
from .simreg import (
    AppManifest, Install, SyslogEntry, SyslogKind, SysState, Trace,
    TraceStep,
)
from .verdict.render import OutputFormat


log = logging.getLogger(__name__)

AclProfile = t.Mapping[str, t.FrozenSet[t.FrozenSet[str]]]
Manifests = t.Mapping[str, AppManifest]


@unique
class AlarmKind(str, Enum):
    keychain_acl_anomaly = "KeychainAclAnomaly"
    scheme_conflict = "SchemeConflict"
    bid_conflict = "BidConflict"
    ns_name_contention = "NsNameContention"

    def __str__(self) -> str:
        return self.value


class Alarm(t.NamedTuple):
    kind: AlarmKind
    subjects: t.Tuple[str, ...]
    details: str
    event_index: int = -1

    def __str__(self) -> str:
        return "[{}] event {}: {} ({})".format(
            self.kind, self.event_index, self.details,
            ", ".join(self.subjects),
        )


class ProfileError(XaraError):
    def __init__(self, message: str, line: t.Optional[int] = None):
        self.message = message
        self.line = line
        super().__init__(message)

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        return "line {}: {}".format(self.line, self.message)


def load_profiles(text: str) -> t.Dict[str, t.FrozenSet[t.FrozenSet[str]]]:
    """
    Read expected keychain ACLs::

        app com.example.victim
            acl victim
            acl victim,victim-helper

    Each ``acl`` line is one ACL the app's items may carry.
    """
    profiles = OrderedDict()   # type: t.Dict[str, t.List[t.FrozenSet[str]]]
    current = None      # type: t.Optional[str]

    for number, raw in enumerate(text.split("\n"), start=1):
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as e:
            raise ProfileError(str(e), line=number) from e
        if not tokens:
            continue

        indented = raw[:1].isspace()
        keyword, args = tokens[0], tokens[1:]

        if keyword == "app" and not indented:
            if len(args) != 1:
                raise ProfileError("expected: app <id>", line=number)
            if args[0] in profiles:
                raise ProfileError(
                    "duplicate profile for {!r}".format(args[0]), line=number,
                )
            current = args[0]
            profiles[current] = []
        elif keyword == "acl" and indented:
            if current is None:
                raise ProfileError("acl outside of an app", line=number)
            members = frozenset(
                member for arg in args
                for member in arg.split(",") if member
            )
            if not members:
                raise ProfileError("empty acl", line=number)
            profiles[current].append(members)
        else:
            raise ProfileError(
                "unexpected {!r}".format(keyword), line=number,
            )

    for app_id, sets in profiles.items():
        if not sets:
            raise ProfileError("profile for {!r} lists no acl".format(app_id))

    return OrderedDict(
        (app_id, frozenset(sets)) for app_id, sets in profiles.items()
    )


def _is_system(
    app_id: str, state: SysState, manifests: t.Optional[Manifests],
) -> bool:
    manifest = None
    if manifests is not None:
        manifest = manifests.get(app_id)
    if manifest is None:
        manifest = state.manifest(app_id)
    return manifest is not None and manifest.is_system


def on_keychain_change(
    before: SysState, after: SysState,
    profiles: t.Optional[AclProfile] = None,
    manifests: t.Optional[Manifests] = None,
    event_index: int = -1,
) -> t.List[Alarm]:
    """
    Inspect the ACL of every keychain item present in ``after`` but not in
    ``before``.

    A system app never shares an ACL with a third-party app, so a mix of
    both is an anomaly. Items whose ACL names a profiled app must carry one
    of the ACLs recorded for it.
    """
    profiles = profiles or {}
    alarms = []     # type: t.List[Alarm]

    for item in after.keychain:
        if before.item(item.handle) is not None:
            continue

        members = item.members
        system = [m for m in members if _is_system(m, after, manifests)]
        third_party = [m for m in members if m not in system]
        if system and third_party:
            alarms.append(Alarm(
                AlarmKind.keychain_acl_anomaly, members,
                "item {} shares its ACL between system app(s) {} and "
                "third-party app(s) {}".format(
                    item.handle, ", ".join(system), ", ".join(third_party),
                ),
                event_index,
            ))

        acl = frozenset(members)
        mismatched = [
            app_id for app_id in members
            if app_id in profiles and acl not in profiles[app_id]
        ]
        if mismatched:
            alarms.append(Alarm(
                AlarmKind.keychain_acl_anomaly, members,
                "ACL of item {} does not match the profile of {}".format(
                    item.handle, ", ".join(mismatched),
                ),
                event_index,
            ))

    return alarms


def on_install(
    state: SysState, manifest: AppManifest, event_index: int = -1,
) -> t.List[Alarm]:
    """
    Compare what ``manifest`` declares with the system it is installed
    into (``state`` is taken before the installation).

    Both apps of a scheme conflict are reported, since there is no way to
    tell which one is legitimate. Reinstalling an app over its own
    registrations is not a conflict.
    """
    alarms = []     # type: t.List[Alarm]
    app_id = manifest.app_id

    for scheme in manifest.schemes:
        owner = state.scheme_owner(scheme)
        if owner is None or owner == app_id:
            continue
        if state.platform is Platform.ios:
            winner, losers = app_id, owner
        else:
            winner, losers = owner, app_id
        alarms.append(Alarm(
            AlarmKind.scheme_conflict, (owner, app_id),
            "scheme {!r} declared by {} is owned by {}: {} gets it on {}, "
            "{} does not".format(
                scheme, app_id, owner, winner, state.platform, losers,
            ),
            event_index,
        ))

    for bid in manifest.bids:
        container = state.container(bid)
        if container is None:
            continue
        others = tuple(member for member in container.acl if member != app_id)
        if not others:
            continue
        alarms.append(Alarm(
            AlarmKind.bid_conflict, others + (app_id,),
            "bundle id {!r} of {} already has a container of {}".format(
                bid, app_id, ", ".join(others),
            ),
            event_index,
        ))

    return alarms


def on_syslog(entry: t.Any, event_index: int = -1) -> t.List[Alarm]:
    """ A failed registration of a taken name means contention for it """
    if not isinstance(entry, SyslogEntry):
        return []
    if entry.kind != SyslogKind.register_failed:
        return []
    subjects = (entry.app_id,)
    if entry.owner is not None:
        subjects += (entry.owner,)
    return [Alarm(
        AlarmKind.ns_name_contention, subjects,
        "{} failed to register {!r} held by {}".format(
            entry.app_id, entry.subject, entry.owner or "another app",
        ),
        event_index,
    )]


def check_step(
    trace: Trace, step: TraceStep,
    manifests: t.Optional[Manifests] = None,
    profiles: t.Optional[AclProfile] = None,
) -> t.List[Alarm]:
    before = trace.before(step.index)
    after = step.state
    alarms = []     # type: t.List[Alarm]

    if isinstance(step.event, Install) and step.outcome.is_ok:
        manifest = None
        if manifests is not None:
            manifest = manifests.get(step.event.app_id)
        if manifest is None:
            manifest = after.manifest(step.event.app_id)
        if manifest is not None:
            alarms.extend(on_install(before, manifest, step.index))

    alarms.extend(
        on_keychain_change(before, after, profiles, manifests, step.index),
    )

    for entry in after.syslog[len(before.syslog):]:
        alarms.extend(on_syslog(entry, step.index))

    return alarms


def watch_trace(
    trace: Trace,
    manifests: t.Optional[Manifests] = None,
    profiles: t.Optional[AclProfile] = None,
) -> t.List[Alarm]:
    """
    Replay ``trace`` through every handler, one consecutive pair of states
    at a time. Alarms come out in event order.
    """
    alarms = []     # type: t.List[Alarm]
    for step in trace:
        alarms.extend(check_step(trace, step, manifests, profiles))
    return alarms


class Monitor:
    """
    Handlers bound to a profile set. Every alarm raised by :meth:`watch` is
    also awaited on the receivers of :attr:`on_alarm`, in event order.
    """

    __slots__ = ("profiles", "manifests", "on_alarm")

    def __init__(
        self, profiles: t.Optional[AclProfile] = None,
        manifests: t.Optional[Manifests] = None,
    ):
        self.profiles = profiles or {}
        self.manifests = manifests
        self.on_alarm = Signal()

    def check(self, trace: Trace) -> t.List[Alarm]:
        return watch_trace(trace, self.manifests, self.profiles)

    async def watch(self, trace: Trace) -> t.List[Alarm]:
        alarms = self.check(trace)
        for alarm in alarms:
            await self.on_alarm.call(alarm)
        log.debug("%d alarm(s) over %d event(s)", len(alarms), len(trace))
        return alarms


def alarm_to_dict(alarm: Alarm) -> t.Dict[str, t.Any]:
    return OrderedDict((
        ("kind", alarm.kind.value),
        ("subjects", list(alarm.subjects)),
        ("details", alarm.details),
        ("event", alarm.event_index),
    ))


def render_alarms(
    alarms: t.Sequence[Alarm],
    output_format: t.Union[OutputFormat, str] = "text",
) -> str:
    if OutputFormat(output_format) is OutputFormat.json:
        return json.dumps(
            [alarm_to_dict(alarm) for alarm in alarms],
            indent=2, ensure_ascii=False,
        ) + "\n"
    lines = ["alarms: {}".format(len(alarms))]
    lines.extend("  {}".format(alarm) for alarm in alarms)
    return "\n".join(lines) + "\n"


__all__ = (
    "AclProfile",
    "Alarm",
    "AlarmKind",
    "Monitor",
    "ProfileError",
    "alarm_to_dict",
    "check_step",
    "load_profiles",
    "on_install",
    "on_keychain_change",
    "on_syslog",
    "render_alarms",
    "watch_trace",
)
