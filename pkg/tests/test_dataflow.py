import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xarascan.cfg import (
    argument_indices, build_callgraph, build_cfg, call_name, feeding_call,
    reachable_instructions,
)
from xarascan.dataflow import (
    Fact, RefSite, Tag, UnreachableDef, auth_on_all_paths,
    auth_on_some_path, compute_chain, compute_interprocedural,
    entry_location,
)
from xarascan.ir import (
    RV, Arg, ArgAddr, Br, Call, Jmp, LoadImm, Move, Procedure, Ret, Stack,
    parse_listing, reg,
)


LOCATIONS = (reg(0), reg(1), reg(2), RV, Stack(0), Stack(8))
locations = st.sampled_from(LOCATIONS)
slots = st.sampled_from((Stack(0), Stack(8)))


@st.composite
def acyclic_procedures(draw, max_size=12):
    """ Procedures whose branches only go forward """
    size = draw(st.integers(min_value=1, max_value=max_size))
    body = []
    for index in range(size):
        choices = [
            st.builds(Move, locations, locations),
            st.builds(LoadImm, locations, st.just(0)),
            st.builds(Arg, st.integers(min_value=0, max_value=2), locations),
            st.builds(ArgAddr, st.integers(min_value=0, max_value=2), slots),
            st.just(Call("f")),
            st.just(Ret()),
        ]
        if index + 1 < size:
            forward = st.integers(min_value=index + 1, max_value=size - 1)
            choices.extend((st.builds(Jmp, forward), st.builds(Br, forward)))
        body.append(draw(st.one_of(*choices)))
    return Procedure("f", tuple(body))


def next_indices(procedure, index):
    instruction = procedure[index]
    if isinstance(instruction, Ret):
        return []
    if isinstance(instruction, Jmp):
        return [instruction.target]
    result = [index + 1] if index + 1 < len(procedure) else []
    if isinstance(instruction, Br) and instruction.target not in result:
        result.append(instruction.target)
    return result


def all_paths(procedure):
    paths = []

    def walk(path):
        following = next_indices(procedure, path[-1])
        if not following:
            paths.append(path)
        for index in following:
            walk(path + [index])

    walk([0])
    return paths


def step(procedure, index, facts):
    instruction = procedure[index]
    result = set(facts)
    if isinstance(instruction, Move):
        copied = {f.tag for f in facts if f.location == instruction.src}
        result = {f for f in result if f.location != instruction.dst}
        result |= {Fact(instruction.dst, tag) for tag in copied}
    elif isinstance(instruction, LoadImm):
        result = {f for f in result if f.location != instruction.dst}
    elif isinstance(instruction, ArgAddr):
        result = {f for f in result if f.location != instruction.slot}
    elif isinstance(instruction, Call):
        result = {f for f in result if f.location != RV}
    return result


@settings(max_examples=1000, deadline=None)
@given(acyclic_procedures(), st.data())
def test_chain_matches_path_enumeration(procedure, data):
    cfg = build_cfg(procedure)
    reachable = sorted(reachable_instructions(cfg))
    definition = data.draw(st.sampled_from(reachable))
    location = data.draw(locations)
    site = RefSite("f", definition, location)

    expected = [set() for _ in range(len(procedure))]
    for path in all_paths(procedure):
        facts = set()
        for index in path:
            expected[index] |= facts
            facts = step(procedure, index, facts)
            if index == definition:
                facts.add(Fact(location, Tag.ref))

    chain = compute_chain(cfg, site)
    for index in range(len(procedure)):
        assert chain.facts_before(index) == frozenset(expected[index])

    found = {use.index for use in chain.uses}
    for index in reachable:
        instruction = procedure[index]
        if not isinstance(instruction, (Arg, ArgAddr)):
            continue
        if isinstance(instruction, Arg):
            via = instruction.src
        else:
            via = instruction.slot
        call = feeding_call(cfg, index)
        is_use = (
            via in chain.carrier_locations(index) and
            call is not None and
            argument_indices(cfg, call).get(instruction.index) == index
        )
        assert (index in found) == is_use


@settings(max_examples=500, deadline=None)
@given(acyclic_procedures(), st.data())
def test_auth_matches_path_enumeration(procedure, data):
    cfg = build_cfg(procedure)
    reachable = sorted(reachable_instructions(cfg))
    definition = data.draw(st.sampled_from(reachable))
    use = data.draw(st.sampled_from(range(len(procedure))))
    auth_sites = data.draw(st.frozensets(
        st.sampled_from(range(len(procedure))), max_size=4,
    ))
    site = RefSite("f", definition, reg(0))

    segments = []
    for path in all_paths(procedure):
        if definition not in path or use not in path:
            continue
        start, end = path.index(definition), path.index(use)
        if end > start:
            segments.append(path[start + 1:end + 1])

    all_paths_covered = all(
        any(index in auth_sites for index in segment)
        for segment in segments
    )
    some_path_covered = any(
        any(index in auth_sites for index in segment)
        for segment in segments
    )

    assert auth_on_all_paths(cfg, site, use, auth_sites) == all_paths_covered
    assert auth_on_some_path(cfg, site, use, auth_sites) == some_path_covered


@st.composite
def looping_procedures(draw, max_size=8):
    """ Procedures whose branches may also go backwards """
    size = draw(st.integers(min_value=1, max_value=max_size))
    targets = st.integers(min_value=0, max_value=size - 1)
    body = draw(st.lists(
        st.one_of(
            st.builds(Move, locations, locations),
            st.just(Call("f")),
            st.just(Ret()),
            st.builds(Jmp, targets),
            st.builds(Br, targets),
        ),
        min_size=size, max_size=size,
    ))
    return Procedure("f", tuple(body))


def simple_paths(procedure, start, goal):
    """ Paths from ``start`` up to the first visit of ``goal`` """
    paths = []

    def walk(path):
        if path[-1] == goal:
            paths.append(path)
            return
        for index in next_indices(procedure, path[-1]):
            if index not in path:
                walk(path + [index])

    walk([start])
    return paths


def reaches(procedure, starts, goal):
    return any(simple_paths(procedure, start, goal) for start in starts)


@settings(max_examples=500, deadline=None)
@given(looping_procedures(), st.data())
def test_auth_in_loops_matches_simple_paths(procedure, data):
    cfg = build_cfg(procedure)
    reachable = sorted(reachable_instructions(cfg))
    definition = data.draw(st.sampled_from(reachable))
    use = data.draw(st.sampled_from(range(len(procedure))))
    auth_sites = data.draw(st.frozensets(
        st.sampled_from(range(len(procedure))), max_size=3,
    ))
    site = RefSite("f", definition, reg(0))
    starts = next_indices(procedure, definition)

    # any walk avoiding the auth sites can be cut down to a simple path
    segments = [
        path for start in starts
        for path in simple_paths(procedure, start, use)
    ]
    all_paths_covered = all(
        any(index in auth_sites for index in segment)
        for segment in segments
    )
    some_path_covered = any(
        reaches(procedure, starts, auth) and (
            auth == use or
            reaches(procedure, next_indices(procedure, auth), use)
        )
        for auth in auth_sites
    )

    assert auth_on_all_paths(cfg, site, use, auth_sites) == all_paths_covered
    assert auth_on_some_path(cfg, site, use, auth_sites) == some_path_covered


CLAIM_AND_USE = """\
# naif-version: 1
.proc "f"
    0: argaddr 3, sp[-8]
    1: call "Claim"
    2: mov r4, sp[-8]
    3: arg 0, r4
    4: call "Use"
    5: imm sp[-8], 0
    6: arg 0, sp[-8]
    7: call "Use"
    8: ret
    9: call "Claim"
   10: ret
.endproc
"""


def test_chain_kills_and_uses():
    cfg = build_cfg(parse_listing(CLAIM_AND_USE).procedure("f"))
    chain = compute_chain(cfg, RefSite("f", 1, Stack(-8)))

    assert [use.index for use in chain.uses] == [3]
    use, = chain.uses
    assert use.call_index == 4
    assert use.arg_slot == 0
    assert use.via == reg(4)
    assert use.tags == {Tag.ref}
    assert chain.use_calls == {4}
    assert chain.kills == (5,)
    assert chain.carrier_locations(6) == {reg(4)}
    assert chain.facts_before(10) == frozenset()


def test_unreachable_definition():
    cfg = build_cfg(parse_listing(CLAIM_AND_USE).procedure("f"))
    with pytest.raises(UnreachableDef) as e:
        compute_chain(cfg, RefSite("f", 9, RV))
    assert e.value.procedure == "f"


def test_definition_in_loop():
    cfg = build_cfg(parse_listing("""\
# naif-version: 1
.proc "f"
    0: call "Claim"
    1: arg 0, rv
    2: call "Use"
    3: br 0
    4: ret
.endproc
""").procedure("f"))
    chain = compute_chain(cfg, RefSite("f", 0, RV))
    # the use call clobbers rv, the claim re-establishes it
    assert [use.index for use in chain.uses] == [1]
    assert chain.carrier_locations(3) == frozenset()


LOOP_AUTH = """\
# naif-version: 1
.proc "f"
    0: argaddr 3, sp[-8]
    1: call "Claim"
    2: call "Check"
    3: arg 0, sp[-8]
    4: call "Use"
    5: br 2
    6: ret
.endproc
"""

LOOP_LATE_AUTH = """\
# naif-version: 1
.proc "f"
    0: argaddr 3, sp[-8]
    1: call "Claim"
    2: arg 0, sp[-8]
    3: call "Use"
    4: call "Check"
    5: br 2
    6: ret
.endproc
"""


@pytest.mark.parametrize("text, auth, use, all_paths_covered", [
    # the check heads the loop body and dominates the use
    (LOOP_AUTH, 2, 3, True),
    # the first iteration reaches the use before any check
    (LOOP_LATE_AUTH, 4, 2, False),
])
def test_auth_in_loop_body(text, auth, use, all_paths_covered):
    cfg = build_cfg(parse_listing(text).procedure("f"))
    site = RefSite("f", 1, Stack(-8))
    chain = compute_chain(cfg, site)

    assert [u.index for u in chain.uses] == [use]
    assert auth_on_all_paths(cfg, site, use, {auth}) is all_paths_covered
    assert auth_on_some_path(cfg, site, use, {auth})


def test_derived_carrier():
    cfg = build_cfg(parse_listing("""\
# naif-version: 1
.proc "f"
    0: argaddr 3, sp[-8]
    1: call "Claim"
    2: arg 0, sp[-8]
    3: call "CopyAccess"
    4: arg 0, rv
    5: call "CheckAccess"
    6: ret
.endproc
""").procedure("f"))

    def derive(cfg, index, facts):
        if call_name(cfg, index) == "CopyAccess":
            return [RV]
        return []

    chain = compute_chain(cfg, RefSite("f", 1, Stack(-8)), derive)
    assert Fact(RV, Tag.derived) in chain.facts_before(4)
    tags = {use.index: use.tags for use in chain.uses}
    assert tags == {2: {Tag.ref}, 4: {Tag.derived}}

    plain = compute_chain(cfg, RefSite("f", 1, Stack(-8)))
    assert [use.index for use in plain.uses] == [2]


def _nested_listing(levels: int) -> str:
    lines = [
        "# naif-version: 1",
        '.proc "p0"',
        "    0: argaddr 3, sp[-8]",
        '    1: call "Claim"',
        "    2: arg 0, sp[-8]",
        '    3: call "p1"',
        "    4: ret",
        ".endproc",
    ]
    for level in range(1, levels + 1):
        callee = "p{}".format(level + 1) if level < levels else "Use"
        lines.extend((
            '.proc "p{}"'.format(level),
            "    0: arg 0, r0",
            '    1: call "{}"'.format(callee),
            "    2: ret",
            ".endproc",
        ))
    return "\n".join(lines) + "\n"


@pytest.mark.parametrize("max_depth, links, truncated", [
    (1, 1, True),
    (3, 3, True),
    (4, 4, False),
    (10, 4, False),
])
def test_interprocedural_depth(max_depth, links, truncated):
    listing = parse_listing(_nested_listing(4))
    cfgs = {proc.name: build_cfg(proc) for proc in listing}
    graph = build_callgraph(listing, cfgs)

    result = compute_interprocedural(
        cfgs, graph, RefSite("p0", 1, Stack(-8)), max_depth=max_depth,
    )
    assert len(result.links) == links
    assert result.truncated is truncated

    for number, link in enumerate(result.links):
        assert link.depth == number + 1
        assert link.chain.definition.procedure == "p{}".format(number + 1)
        assert link.chain.definition.at_entry
        assert link.chain.definition.location == entry_location(0)

    path = result.path_to(len(result.links) - 1)
    assert [link.caller for link in path] == [
        "p{}".format(n) for n in range(links)
    ]
    assert len(list(result.chains())) == links + 1


def test_interprocedural_recursion():
    listing = parse_listing("""\
# naif-version: 1
.proc "f"
    0: call "Claim"
    1: arg 1, rv
    2: call "g"
    3: ret
.endproc
.proc "g"
    0: arg 1, r1
    1: call "g"
    2: ret
.endproc
""")
    cfgs = {proc.name: build_cfg(proc) for proc in listing}
    result = compute_interprocedural(
        cfgs, build_callgraph(listing, cfgs), RefSite("f", 0, RV),
    )
    assert len(result.links) == 1
    assert not result.truncated
    assert entry_location(1) == reg(1)
