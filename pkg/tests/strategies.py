from hypothesis import strategies as st

from xarascan.ir import (
    Arg, ArgAddr, Br, Call, Jmp, Listing, LoadImm, LoadSel, LoadStr, Move,
    Procedure, Reg, Ret, Stack,
)
from xarascan.ir.types import REGISTERS
from xarascan.simreg import (
    AclEntry, AppManifest, BindPort, ConnectNsName, ConnectPort,
    ContainerRead, ContainerWrite, Entitlement, Install, KcCreate, KcDelete,
    KcFind, KcRead, KcReadAttrs, KcUpdate, OpenUrl, Permission,
    RegisterNsName, Uninstall, VetApp,
)


texts = st.text(
    st.characters(blacklist_categories=("Cs",)), max_size=16,
)
names = st.text(
    st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=16,
)
stack_slots = st.integers(min_value=-4096, max_value=4095).map(Stack)
locations = st.one_of(st.sampled_from(REGISTERS).map(Reg), stack_slots)
arg_indices = st.integers(min_value=0, max_value=15)


def instructions(size: int, branches: bool = True):
    """ Any instruction of a procedure holding ``size`` of them """
    choices = [
        st.builds(Move, locations, locations),
        st.builds(LoadSel, locations, texts),
        st.builds(LoadStr, locations, texts),
        st.builds(
            LoadImm, locations,
            st.integers(min_value=-2 ** 63, max_value=2 ** 64),
        ),
        st.builds(Arg, arg_indices, locations),
        st.builds(ArgAddr, arg_indices, stack_slots),
        st.builds(Call, names),
        st.just(Ret()),
    ]
    if branches:
        targets = st.integers(min_value=0, max_value=size - 1)
        choices.extend((st.builds(Jmp, targets), st.builds(Br, targets)))
    return st.one_of(*choices)


@st.composite
def procedures(draw, name="proc", max_size=12):
    size = draw(st.integers(min_value=1, max_value=max_size))
    body = draw(st.lists(instructions(size), min_size=size, max_size=size))
    return Procedure(name, tuple(body))


@st.composite
def listings(draw):
    proc_names = draw(st.lists(names, unique=True, max_size=4))
    return Listing(tuple(draw(procedures(name)) for name in proc_names))


APPS = ("alpha", "beta", "gamma")
SCHEMES = ("shared", "alpha")
NS_NAMES = ("com.example.sync", "com.example.agent")


def _manifests():
    return [
        AppManifest(
            "alpha", "T1", "com.example.alpha", schemes=SCHEMES,
            entitlements=frozenset({Entitlement.network}),
        ),
        AppManifest(
            "beta", "T2", "com.example.beta",
            sub_bids=("com.example.alpha",), schemes=("shared",),
        ),
        AppManifest(
            "gamma", "apple-system", "com.apple.gamma", schemes=("shared",),
            entitlements=frozenset({Entitlement.network}),
        ),
    ]


@st.composite
def scenarios(draw, max_size=30):
    """
    Event lists valid against the state they run in: every app is vetted
    first and only installed apps act.
    """
    events = [VetApp(m.app_id, m) for m in _manifests()]
    installed = []      # type: list
    attrs = st.sampled_from((
        (("service", "a"),), (("service", "b"),),
        (("account", "x"), ("service", "a")),
    ))
    acl = st.lists(
        st.builds(
            AclEntry, st.sampled_from(APPS),
            st.sampled_from((
                frozenset({Permission.read}), frozenset({Permission.write}),
                frozenset(Permission),
            )),
        ),
        max_size=3, unique_by=lambda entry: entry.app_id,
    ).map(tuple)
    handles = st.integers(min_value=1, max_value=5)
    bids = st.sampled_from(
        ("com.example.alpha", "com.example.beta", "com.apple.gamma"),
    )
    paths = st.sampled_from(("a", "b"))

    for _ in range(draw(st.integers(min_value=0, max_value=max_size))):
        idle = [app for app in APPS if app not in installed]
        if not installed or (idle and draw(st.booleans())):
            app = draw(st.sampled_from(idle))
            installed.append(app)
            events.append(Install(app))
            continue

        app = draw(st.sampled_from(installed))
        event = draw(st.one_of(
            st.just(Uninstall(app)),
            st.builds(KcCreate, st.just(app), attrs, texts, acl),
            st.builds(KcFind, st.just(app), attrs),
            st.builds(KcUpdate, st.just(app), handles, texts),
            st.builds(KcRead, st.just(app), handles),
            st.builds(KcDelete, st.just(app), attrs),
            st.builds(KcReadAttrs, st.just(app), attrs),
            st.builds(RegisterNsName, st.just(app), st.sampled_from(NS_NAMES)),
            st.builds(
                ConnectNsName, st.just(app), st.sampled_from(NS_NAMES),
                st.none() | texts,
            ),
            st.builds(BindPort, st.just(app), st.sampled_from((80, 443))),
            st.builds(
                ConnectPort, st.just(app), st.sampled_from((80, 443)),
                st.none() | texts,
            ),
            st.builds(
                OpenUrl, st.just(app),
                st.sampled_from(("shared://x", "alpha://y", "none://z")),
            ),
            st.builds(ContainerWrite, st.just(app), bids, paths, texts),
            st.builds(ContainerRead, st.just(app), bids, paths),
        ))
        if isinstance(event, Uninstall):
            installed.remove(app)
        events.append(event)

    return events


def _benign_manifests():
    return [
        AppManifest(
            app_id, team, "{}.{}".format(prefix, app_id), schemes=(app_id,),
            entitlements=frozenset({Entitlement.network}),
        )
        for app_id, team, prefix in (
            ("alpha", "T1", "com.example"),
            ("beta", "T2", "com.example"),
            ("gamma", "apple-system", "com.apple"),
        )
    ]


@st.composite
def benign_scenarios(draw, max_size=50):
    """
    Everyday traffic: every app keeps its own keychain items (owner-only
    ACLs), its own container, scheme, name and port, and only talks to
    the others through their published endpoints.
    """
    manifests = {m.app_id: m for m in _benign_manifests()}
    events = [VetApp(app_id, m) for app_id, m in manifests.items()]
    installed = []      # type: list
    handles = st.integers(min_value=1, max_value=5)
    ports = {app_id: 8000 + n for n, app_id in enumerate(APPS)}

    for _ in range(draw(st.integers(min_value=0, max_value=max_size))):
        idle = [app for app in APPS if app not in installed]
        if not installed or (idle and draw(st.booleans())):
            app = draw(st.sampled_from(idle))
            installed.append(app)
            events.append(Install(app))
            continue

        app = draw(st.sampled_from(installed))
        own = st.sampled_from((
            (("service", app),), (("account", "x"), ("service", app)),
        ))
        bid = manifests[app].bid
        paths = st.sampled_from(("a", "b"))
        event = draw(st.one_of(
            st.just(Uninstall(app)),
            st.builds(KcCreate, st.just(app), own, texts),
            st.builds(KcFind, st.just(app), own),
            st.builds(KcUpdate, st.just(app), handles, texts),
            st.builds(KcRead, st.just(app), handles),
            st.builds(KcDelete, st.just(app), own),
            st.builds(KcReadAttrs, st.just(app), own),
            st.just(RegisterNsName(app, "com.example.{}".format(app))),
            st.builds(
                ConnectNsName, st.just(app),
                st.sampled_from(APPS).map("com.example.{}".format),
                st.none() | texts,
            ),
            st.just(BindPort(app, ports[app])),
            st.builds(
                ConnectPort, st.just(app), st.sampled_from(sorted(
                    ports.values(),
                )),
                st.none() | texts,
            ),
            st.builds(
                OpenUrl, st.just(app),
                st.sampled_from(APPS).map("{}://open".format),
            ),
            st.builds(ContainerWrite, st.just(app), st.just(bid), paths, texts),
            st.builds(ContainerRead, st.just(app), st.just(bid), paths),
        ))
        if isinstance(event, Uninstall):
            installed.remove(app)
        events.append(event)

    return events
