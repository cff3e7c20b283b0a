import json

import pytest
from aiomisc import receiver
from hypothesis import given, settings
from hypothesis import strategies as st

from xarascan.monitor import (
    Alarm, AlarmKind, Monitor, ProfileError, alarm_to_dict, load_profiles,
    on_install, on_keychain_change, on_syslog, render_alarms, watch_trace,
)
from xarascan.platform import Platform
from xarascan.simreg import (
    AclEntry, AppManifest, Install, KcCreate, SyslogEntry, SyslogKind,
    SysState, VetApp, apply, parse_scenario, run_scenario,
)

from . import PROFILES
from .strategies import APPS, benign_scenarios


@pytest.fixture(scope="module")
def profiles():
    return load_profiles((PROFILES / "popular.profiles").read_text())


@pytest.fixture
def trace_of(read_scenario):
    def run(name, platform=None):
        scenario = parse_scenario(read_scenario(name), source=name)
        return run_scenario(
            scenario.events, platform or scenario.platform or Platform.osx,
        )
    return run


def first_delivery(trace, app_id):
    for step in trace:
        if step.state.received_by(app_id):
            return step.index
    raise AssertionError("{} received nothing".format(app_id))


def test_load_profiles(profiles):
    assert list(profiles) == ["victim", "notes", "InternetAccounts"]
    assert profiles["victim"] == {frozenset({"victim"})}
    assert profiles["notes"] == {
        frozenset({"notes"}), frozenset({"notes", "notes-helper"}),
    }


@pytest.mark.parametrize("text, line", [
    ("    acl victim\n", 1),
    ("app\n", 1),
    ("app a b\n", 1),
    ("app a\n    acl a\napp a\n    acl a\n", 3),
    ("app a\n    acl ,\n", 2),
    ("app a\n    deny b\n", 2),
    ("app a\nacl a\n", 2),
    ("app 'a\n", 1),
    ("app a\n", None),
])
def test_bad_profiles(text, line):
    with pytest.raises(ProfileError) as e:
        load_profiles(text)
    assert e.value.line == line


def _state_with(*manifests):
    state = SysState()
    for manifest in manifests:
        state, _ = apply(state, VetApp(manifest.app_id, manifest))
        state, _ = apply(state, Install(manifest.app_id))
    return state


def test_keychain_handler():
    system = AppManifest("keys", "apple-system", "com.apple.keys")
    app = AppManifest("app", "T1", "com.app")
    before = _state_with(system, app)

    after, _ = apply(before, KcCreate(
        "app", (("service", "s"),), "x", (AclEntry("app"), AclEntry("keys")),
    ))
    alarm, = on_keychain_change(before, after, event_index=7)
    assert alarm.kind is AlarmKind.keychain_acl_anomaly
    assert alarm.subjects == ("app", "keys")
    assert alarm.event_index == 7

    # only items new in ``after`` are inspected
    assert on_keychain_change(after, after) == []

    plain, _ = apply(before, KcCreate("app", (("service", "s"),), "x"))
    assert on_keychain_change(before, plain) == []
    assert on_keychain_change(
        before, plain, profiles={"app": frozenset({frozenset({"other"})})},
    )


def test_install_handler():
    victim = AppManifest("victim", "T1", "com.victim", schemes=("fb1",))
    state = _state_with(victim)

    attacker = AppManifest(
        "attacker", "T2", "com.attacker", sub_bids=("com.victim",),
        schemes=("FB1",),
    )
    scheme, bid = on_install(state, attacker, 3)
    assert scheme.kind is AlarmKind.scheme_conflict
    assert scheme.subjects == ("victim", "attacker")
    assert bid.kind is AlarmKind.bid_conflict
    assert bid.subjects == ("victim", "attacker")

    # reinstalling over its own registrations
    assert on_install(state, victim) == []


def test_syslog_handler():
    entry = SyslogEntry(SyslogKind.register_failed, "name", "late", "early")
    alarm, = on_syslog(entry, 2)
    assert alarm.kind is AlarmKind.ns_name_contention
    assert alarm.subjects == ("late", "early")
    assert on_syslog(SyslogEntry("other", "name", "app")) == []
    assert on_syslog("register-failed") == []


@pytest.mark.parametrize("name, kind, index, victim, attacker", [
    (
        "keychain_preempt.scn", AlarmKind.keychain_acl_anomaly, 4,
        "victim", "attacker",
    ),
    (
        "keychain_delete_recreate.scn", AlarmKind.keychain_acl_anomaly, 7,
        "victim", "attacker",
    ),
    (
        "icloud_keychain.scn", AlarmKind.keychain_acl_anomaly, 4,
        "InternetAccounts", "attacker",
    ),
    (
        "container_bid.scn", AlarmKind.bid_conflict, 3,
        "victim", "attacker",
    ),
    (
        "nsconnection.scn", AlarmKind.ns_name_contention, 5,
        "victim", "attacker",
    ),
    (
        "scheme_hijack.scn", AlarmKind.scheme_conflict, 4,
        "victim", "attacker",
    ),
])
def test_attack_is_flagged_before_delivery(
    trace_of, profiles, name, kind, index, victim, attacker,
):
    trace = trace_of(name)
    alarms = watch_trace(trace, profiles=profiles)

    assert alarms
    assert {alarm.kind for alarm in alarms} == {kind}
    assert alarms[0].event_index == index
    assert {victim, attacker} <= set(alarms[0].subjects)

    if attacker in dict(trace.final.received):
        assert index < first_delivery(trace, attacker)


def test_keychain_alarms_need_profiles(trace_of):
    assert watch_trace(trace_of("keychain_preempt.scn")) == []

    # a system app sharing an ACL with a third party needs no profile
    alarm, = watch_trace(trace_of("icloud_keychain.scn"))
    assert "system app(s) InternetAccounts" in alarm.details


def test_icloud_with_profiles(trace_of, profiles):
    alarms = watch_trace(trace_of("icloud_keychain.scn"), profiles=profiles)
    assert len(alarms) == 2
    assert {alarm.event_index for alarm in alarms} == {4}


@pytest.mark.parametrize("platform", list(Platform))
def test_scheme_alarm_on_both_platforms(trace_of, platform):
    alarm, = watch_trace(trace_of("scheme_hijack.scn", platform))
    assert alarm.subjects == ("victim", "attacker")
    assert str(platform) in alarm.details


def test_port_contention_is_invisible(trace_of, profiles):
    trace = trace_of("websocket_port.scn")
    assert trace.final.received_by("attacker")
    assert watch_trace(trace, profiles=profiles) == []


@pytest.mark.parametrize("use_profiles", [False, True])
def test_benign_is_quiet(trace_of, profiles, use_profiles):
    trace = trace_of("benign.scn")
    assert watch_trace(
        trace, profiles=profiles if use_profiles else None,
    ) == []


@settings(max_examples=200, deadline=None)
@given(benign_scenarios(), st.sampled_from(list(Platform)))
def test_generated_benign_traffic_is_quiet(events, platform):
    trace = run_scenario(events, platform)
    owner_only = {
        app_id: frozenset({frozenset({app_id})}) for app_id in APPS
    }
    assert Monitor().check(trace) == []
    assert Monitor(owner_only).check(trace) == []


async def test_monitor_signal(loop, trace_of, profiles):
    trace = trace_of("keychain_delete_recreate.scn")
    monitor = Monitor(profiles)
    received = []

    @receiver(monitor.on_alarm)
    async def collect(alarm):
        received.append(alarm)

    alarms = await monitor.watch(trace)
    assert alarms
    assert alarms == received == monitor.check(trace)
    assert await monitor.watch(trace) == alarms
    assert len(received) == 2 * len(alarms)


def test_monitor_signal_needs_coroutines():
    monitor = Monitor()
    with pytest.raises(RuntimeError):
        monitor.on_alarm.connect(print)


def test_manifests_override_store(trace_of):
    trace = trace_of("keychain_preempt.scn")
    manifests = {
        "victim": AppManifest("victim", "apple-system", "com.apple.victim"),
    }
    alarm, = watch_trace(trace, manifests=manifests)
    assert alarm.kind is AlarmKind.keychain_acl_anomaly


def test_render_alarms():
    alarms = [Alarm(
        AlarmKind.bid_conflict, ("victim", "attacker"), "shared", 3,
    )]
    text = render_alarms(alarms)
    assert text == (
        "alarms: 1\n  [BidConflict] event 3: shared (victim, attacker)\n"
    )
    assert json.loads(render_alarms(alarms, "json")) == [
        alarm_to_dict(alarms[0]),
    ]
    assert alarm_to_dict(alarms[0]) == {
        "kind": "BidConflict",
        "subjects": ["victim", "attacker"],
        "details": "shared",
        "event": 3,
    }
    assert render_alarms([]) == "alarms: 0\n"
