"""
Define-use chains of channel references.

Facts are ``(location, tag)`` pairs: a location that may hold the claimed
reference (``ref``) or an object derived from it (``derived``). Uses are
collected by a forward may-analysis, authentication is checked with an
all-paths query over the instruction graph.
"""
import logging
import typing as t
from collections import deque
from enum import Enum, unique

from .cfg import (
    CallGraph, Cfg, argument_indices, feeding_call, reachable_instructions,
)
from .exceptions import XaraError
from .ir import (
    RV, Arg, ArgAddr, Call, Location, Move, reg,
)
from .ir.types import LOADS


log = logging.getLogger(__name__)

MAX_CALL_DEPTH = 3


class AnalysisError(XaraError):
    def __init__(self, message: str, procedure: t.Optional[str] = None):
        self.message = message
        self.procedure = procedure
        super().__init__(message)

    def __str__(self) -> str:
        if self.procedure is None:
            return self.message
        return "{}: {}".format(self.procedure, self.message)


class UnreachableDef(AnalysisError):
    pass


@unique
class Tag(str, Enum):
    ref = "ref"
    derived = "derived"


class Fact(t.NamedTuple):
    location: Location
    tag: Tag


Facts = t.FrozenSet[Fact]
DerivePolicy = t.Callable[[Cfg, int, Facts], t.Iterable[Location]]


def tags_at(facts: Facts, location: Location) -> t.FrozenSet[Tag]:
    return frozenset(fact.tag for fact in facts if fact.location == location)


def locations(facts: Facts) -> t.FrozenSet[Location]:
    return frozenset(fact.location for fact in facts)


class RefSite(t.NamedTuple):
    procedure: str
    index: int
    location: Location
    # the reference arrives in ``location`` before instruction 0 runs
    at_entry: bool = False
    tag: Tag = Tag.ref

    def __str__(self) -> str:
        if self.at_entry:
            return "{}:entry {}".format(self.procedure, self.location)
        return "{}:{} {}".format(self.procedure, self.index, self.location)


class UseSite(t.NamedTuple):
    index: int          # arg or argaddr instruction
    call_index: int
    arg_slot: int
    via: Location
    tags: t.FrozenSet[Tag]


class DefUseChain(t.NamedTuple):
    definition: RefSite
    uses: t.Tuple[UseSite, ...]
    kills: t.Tuple[int, ...]
    # facts holding before each instruction, empty for unreachable code
    carriers: t.Tuple[Facts, ...]

    def facts_before(self, index: int) -> Facts:
        return self.carriers[index]

    def carrier_locations(self, index: int) -> t.FrozenSet[Location]:
        return locations(self.carriers[index])

    @property
    def use_calls(self) -> t.FrozenSet[int]:
        return frozenset(use.call_index for use in self.uses)


def _kill(facts: t.Set[Fact], location: Location) -> bool:
    doomed = {fact for fact in facts if fact.location == location}
    facts -= doomed
    return bool(doomed)


def transfer(
    cfg: Cfg, index: int, facts: Facts,
    derive: t.Optional[DerivePolicy] = None,
) -> t.Tuple[Facts, bool]:
    """ Facts after ``index`` and whether a carrier was overwritten """
    instruction = cfg.procedure[index]
    result = set(facts)
    killed = False

    if isinstance(instruction, Move):
        copied = tags_at(facts, instruction.src)
        killed = _kill(result, instruction.dst) and not copied
        result.update(Fact(instruction.dst, tag) for tag in copied)
    elif isinstance(instruction, LOADS):
        killed = _kill(result, instruction.dst)     # type: ignore
    elif isinstance(instruction, ArgAddr):
        killed = _kill(result, instruction.slot)
    elif isinstance(instruction, Call):
        derived = tuple(derive(cfg, index, facts)) if derive else ()
        killed = _kill(result, RV) and not derived
        result.update(Fact(location, Tag.derived) for location in derived)

    return frozenset(result), killed


def _initial(definition: RefSite) -> Facts:
    if definition.at_entry:
        return frozenset({Fact(definition.location, definition.tag)})
    return frozenset()


def compute_chain(
    cfg: Cfg, definition: RefSite,
    derive: t.Optional[DerivePolicy] = None,
) -> DefUseChain:
    """
    Forward may-analysis of where the reference defined at ``definition``
    flows.

    The definition fact is added after the defining instruction itself ran,
    so a definition inside a loop is re-established on every iteration.
    Only instructions reachable from the procedure entry are analysed.
    """
    procedure = cfg.procedure
    reachable = reachable_instructions(cfg)

    if not definition.at_entry and definition.index not in reachable:
        raise UnreachableDef(
            "definition at {} is not reachable from the entry".format(
                definition.index,
            ),
            procedure=procedure.name,
        )

    predecessors = {
        index: [] for index in range(len(procedure))
    }   # type: t.Dict[int, t.List[int]]
    for index in reachable:
        for successor in cfg.successors_of(index):
            predecessors[successor].append(index)

    before = [frozenset()] * len(procedure)   # type: t.List[Facts]
    after = {}      # type: t.Dict[int, Facts]
    pending = deque([0])
    queued = {0}
    rounds = 0

    while pending:
        index = pending.popleft()
        queued.discard(index)
        rounds += 1

        incoming = set(_initial(definition)) if index == 0 else set()
        for predecessor in predecessors[index]:
            incoming.update(after.get(predecessor, frozenset()))
        facts_in = frozenset(incoming)
        before[index] = facts_in

        facts_out, _ = transfer(cfg, index, facts_in, derive)
        if not definition.at_entry and index == definition.index:
            facts_out |= {Fact(definition.location, definition.tag)}

        if index in after and after[index] == facts_out:
            continue
        after[index] = facts_out
        for successor in cfg.successors_of(index):
            if successor not in queued:
                queued.add(successor)
                pending.append(successor)

    log.debug(
        "Chain from %s reached a fixpoint after %d step(s)",
        definition, rounds,
    )

    kills = [
        index for index in sorted(reachable)
        if transfer(cfg, index, before[index], derive)[1]
        and (definition.at_entry or index != definition.index)
    ]

    uses = []   # type: t.List[UseSite]
    for index in sorted(reachable):
        instruction = procedure[index]
        if isinstance(instruction, Arg):
            via = instruction.src   # type: Location
        elif isinstance(instruction, ArgAddr):
            via = instruction.slot
        else:
            continue

        tags = tags_at(before[index], via)
        if not tags:
            continue
        call = feeding_call(cfg, index)
        if call is None:
            continue
        if argument_indices(cfg, call).get(instruction.index) != index:
            continue
        uses.append(UseSite(index, call, instruction.index, via, tags))

    return DefUseChain(
        definition=definition,
        uses=tuple(uses),
        kills=tuple(kills),
        carriers=tuple(before),
    )


def auth_on_all_paths(
    cfg: Cfg, definition: RefSite, use_index: int,
    auth_sites: t.AbstractSet[int],
) -> bool:
    """
    Whether every path from ``definition`` to ``use_index`` crosses one of
    ``auth_sites``.

    The search does not continue past an auth site, so the answer is false
    exactly when the use is reachable from the definition in the graph with
    the auth sites removed. Cycles are therefore walked at most once.
    """
    if definition.at_entry:
        start = (0,)    # type: t.Tuple[int, ...]
    else:
        start = cfg.successors_of(definition.index)

    seen = set()    # type: t.Set[int]
    pending = deque(start)
    while pending:
        index = pending.popleft()
        if index in seen:
            continue
        seen.add(index)
        if index in auth_sites:
            continue
        if index == use_index:
            return False
        pending.extend(cfg.successors_of(index))
    return True


def _forward(cfg: Cfg, start: t.Iterable[int]) -> t.Set[int]:
    seen = set()    # type: t.Set[int]
    pending = deque(start)
    while pending:
        index = pending.popleft()
        if index in seen:
            continue
        seen.add(index)
        pending.extend(cfg.successors_of(index))
    return seen


def auth_on_some_path(
    cfg: Cfg, definition: RefSite, use_index: int,
    auth_sites: t.AbstractSet[int],
) -> bool:
    """ Whether any auth site lies on some path from definition to use """
    if definition.at_entry:
        start = (0,)    # type: t.Tuple[int, ...]
    else:
        start = cfg.successors_of(definition.index)
    after_def = _forward(cfg, start)
    return any(
        site == use_index or use_index in _forward(
            cfg, cfg.successors_of(site),
        )
        for site in auth_sites
        if site in after_def
    )


def entry_location(arg_slot: int) -> Location:
    """ Where a callee finds the value passed as argument ``arg_slot`` """
    return reg(arg_slot)


class ChainLink(t.NamedTuple):
    caller: str
    call_site: UseSite
    chain: DefUseChain
    depth: int
    # index of the link holding the caller chain, None for the root
    parent: t.Optional[int] = None


class InterproceduralChain(t.NamedTuple):
    root: DefUseChain
    links: t.Tuple[ChainLink, ...] = ()
    truncated: bool = False

    def chains(self) -> t.Iterator[t.Tuple[t.Optional[int], DefUseChain]]:
        """ Pairs of link index (None for the root) and chain """
        yield None, self.root
        for number, link in enumerate(self.links):
            yield number, link.chain

    def path_to(self, link: t.Optional[int]) -> t.Tuple[ChainLink, ...]:
        """ Links leading from the root down to link number ``link`` """
        path = []   # type: t.List[ChainLink]
        while link is not None:
            path.append(self.links[link])
            link = self.links[link].parent
        return tuple(reversed(path))


def compute_interprocedural(
    cfgs: t.Mapping[str, Cfg], callgraph: CallGraph, definition: RefSite,
    derive: t.Optional[DerivePolicy] = None,
    max_depth: int = MAX_CALL_DEPTH,
) -> InterproceduralChain:
    """
    Follow a reference into local procedures it is passed to.

    A carrier passed as argument ``k`` to a procedure of the listing
    continues in the callee as a definition at entry in register ``r<k>``.
    Stack slots passed by address are not followed. Going deeper than
    ``max_depth`` calls marks the result truncated.
    """
    root = compute_chain(cfgs[definition.procedure], definition, derive)
    links = []      # type: t.List[ChainLink]
    truncated = False
    seen = {(definition.procedure, definition.location, definition.tag)}
    pending = deque(
        [(root, 0, None)],
    )   # type: t.Deque[t.Tuple[DefUseChain, int, t.Optional[int]]]

    while pending:
        chain, depth, parent = pending.popleft()
        caller = chain.definition.procedure
        for use in chain.uses:
            if isinstance(cfgs[caller].procedure[use.index], ArgAddr):
                continue
            callee = callgraph.callee(caller, use.call_index)
            if callee is None:
                continue
            if depth >= max_depth:
                log.debug(
                    "Not following %s into %r beyond depth %d",
                    chain.definition, callee, max_depth,
                )
                truncated = True
                continue
            for tag in sorted(use.tags):
                location = entry_location(use.arg_slot)
                if (callee, location, tag) in seen:
                    continue
                seen.add((callee, location, tag))
                site = RefSite(callee, 0, location, at_entry=True, tag=tag)
                linked = compute_chain(cfgs[callee], site, derive)
                links.append(ChainLink(caller, use, linked, depth + 1, parent))
                pending.append((linked, depth + 1, len(links) - 1))

    return InterproceduralChain(root, tuple(links), truncated)


__all__ = (
    "AnalysisError",
    "ChainLink",
    "DefUseChain",
    "DerivePolicy",
    "Fact",
    "Facts",
    "InterproceduralChain",
    "MAX_CALL_DEPTH",
    "RefSite",
    "Tag",
    "UnreachableDef",
    "UseSite",
    "auth_on_all_paths",
    "auth_on_some_path",
    "compute_chain",
    "compute_interprocedural",
    "entry_location",
    "locations",
    "tags_at",
    "transfer",
)
