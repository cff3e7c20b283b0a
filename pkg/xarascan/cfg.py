"""
Control-flow graphs of NAIF procedures and the call graph of a listing.

Objective-C calls are ``objc_msgSend`` calls whose second argument holds a
selector loaded by ``sel``; the selector is recovered by tracing copies
backwards inside the calling block only.
"""
import bisect
import logging
import typing as t

from .ir import (
    OBJC_MSGSEND, RV, Arg, ArgAddr, Br, Call, Instruction, Jmp, Listing,
    LoadSel, LoadStr, Location, Move, Procedure, Ret,
)
from .ir.printer import format_instruction
from .ir.types import LOADS, TERMINATORS


log = logging.getLogger(__name__)

CallArgument = t.Union[Arg, ArgAddr]


class BasicBlock(t.NamedTuple):
    id: int
    start: int
    end: int
    successors: t.Tuple[int, ...]

    @property
    def indices(self) -> range:
        return range(self.start, self.end)

    def __len__(self) -> int:
        return self.end - self.start


class Cfg(t.NamedTuple):
    procedure: Procedure
    blocks: t.Tuple[BasicBlock, ...]
    entry: int = 0

    @property
    def name(self) -> str:
        return self.procedure.name

    def block_of(self, index: int) -> BasicBlock:
        if not 0 <= index < len(self.procedure):
            raise IndexError(index)
        starts = [block.start for block in self.blocks]
        return self.blocks[bisect.bisect_right(starts, index) - 1]

    def successors_of(self, index: int) -> t.Tuple[int, ...]:
        return instruction_successors(self.procedure, index)

    def edges(self) -> t.Iterator[t.Tuple[int, int]]:
        for block in self.blocks:
            for successor in block.successors:
                yield block.id, successor


def instruction_successors(
    procedure: Procedure, index: int,
) -> t.Tuple[int, ...]:
    """ Indices control may reach right after executing ``index`` """
    instruction = procedure[index]
    following = index + 1 if index + 1 < len(procedure) else None

    if isinstance(instruction, Ret):
        return ()
    if isinstance(instruction, Jmp):
        return (instruction.target,)
    if isinstance(instruction, Br):
        # a final br, or one whose target is the fallthrough, has one edge
        if following is None or following == instruction.target:
            return (instruction.target,)
        return (following, instruction.target)
    return () if following is None else (following,)


def leaders(procedure: Procedure) -> t.FrozenSet[int]:
    result = {0}
    for index, instruction in enumerate(procedure.instructions):
        if isinstance(instruction, (Jmp, Br)):
            result.add(instruction.target)
        if isinstance(instruction, TERMINATORS):
            if index + 1 < len(procedure):
                result.add(index + 1)
    return frozenset(result)


def build_cfg(procedure: Procedure) -> Cfg:
    """
    Split ``procedure`` into maximal leader-to-leader runs.

    Leaders are the entry, every branch target and every instruction
    following a ``jmp``, ``br`` or ``ret``. Code following a ``ret`` forms
    its own block even when nothing reaches it.
    """
    starts = sorted(leaders(procedure))
    block_id = {start: number for number, start in enumerate(starts)}
    ends = starts[1:] + [len(procedure)]

    blocks = []
    for number, (start, end) in enumerate(zip(starts, ends)):
        successors = instruction_successors(procedure, end - 1)
        blocks.append(BasicBlock(
            id=number, start=start, end=end,
            successors=tuple(block_id[index] for index in successors),
        ))

    log.debug("Built %d block(s) for %r", len(blocks), procedure.name)
    return Cfg(procedure, tuple(blocks), entry=0)


def reachable_blocks(cfg: Cfg) -> t.FrozenSet[int]:
    seen = set()    # type: t.Set[int]
    stack = [cfg.entry]
    while stack:
        block = stack.pop()
        if block in seen:
            continue
        seen.add(block)
        stack.extend(cfg.blocks[block].successors)
    return frozenset(seen)


def reachable_instructions(cfg: Cfg) -> t.FrozenSet[int]:
    return frozenset(
        index
        for block in reachable_blocks(cfg)
        for index in cfg.blocks[block].indices
    )


def call_arguments(cfg: Cfg, call_index: int) -> t.Dict[int, CallArgument]:
    """
    Argument instructions feeding the call at ``call_index``.

    Those are the ``arg``/``argaddr`` instructions written after the
    previous call of the same block; a later one wins for a repeated index.
    """
    procedure = cfg.procedure
    start = cfg.block_of(call_index).start
    for index in range(call_index - 1, start - 1, -1):
        if isinstance(procedure[index], Call):
            start = index + 1
            break

    arguments = {}  # type: t.Dict[int, CallArgument]
    for index in range(start, call_index):
        instruction = procedure[index]
        if isinstance(instruction, (Arg, ArgAddr)):
            arguments[instruction.index] = instruction
    return arguments


def argument_indices(cfg: Cfg, call_index: int) -> t.Dict[int, int]:
    """ Argument slot to the instruction index binding it """
    procedure = cfg.procedure
    start = cfg.block_of(call_index).start
    found = {}  # type: t.Dict[int, int]
    for index in range(call_index - 1, start - 1, -1):
        instruction = procedure[index]
        if isinstance(instruction, Call):
            break
        if isinstance(instruction, (Arg, ArgAddr)):
            found.setdefault(instruction.index, index)
    return found


def feeding_call(cfg: Cfg, index: int) -> t.Optional[int]:
    """ The call consuming the argument written at ``index`` """
    block = cfg.block_of(index)
    for position in range(index + 1, block.end):
        instruction = cfg.procedure[position]
        if isinstance(instruction, Call):
            return position
        if isinstance(instruction, TERMINATORS):
            return None
    return None


def written_locations(cfg: Cfg, index: int) -> t.Tuple[Location, ...]:
    instruction = cfg.procedure[index]
    if isinstance(instruction, (Move,) + LOADS):
        return (instruction.dst,)   # type: ignore
    if isinstance(instruction, ArgAddr):
        return (instruction.slot,)
    if isinstance(instruction, Call):
        slots = tuple(
            arg.slot for arg in call_arguments(cfg, index).values()
            if isinstance(arg, ArgAddr)
        )
        return (RV,) + slots
    return ()


def trace_load(
    cfg: Cfg, location: Location, before: int,
) -> t.Optional[Instruction]:
    """
    The ``sel``/``str``/``imm`` whose value ``location`` holds right
    before ``before``, following copies inside the block.
    """
    start = cfg.block_of(before).start
    for index in range(before - 1, start - 1, -1):
        if location not in written_locations(cfg, index):
            continue
        instruction = cfg.procedure[index]
        if isinstance(instruction, LOADS):
            return instruction
        if isinstance(instruction, Move):
            location = instruction.src
            continue
        return None
    return None


def resolve_selector(cfg: Cfg, call_index: int) -> t.Optional[str]:
    """
    Selector literal sent by the ``objc_msgSend`` at ``call_index``, if
    the second argument provably holds one.
    """
    call = cfg.procedure[call_index]
    if not isinstance(call, Call) or call.symbol != OBJC_MSGSEND:
        return None
    bound = argument_indices(cfg, call_index).get(1)
    if bound is None:
        return None
    argument = cfg.procedure[bound]
    if not isinstance(argument, Arg):
        return None
    load = trace_load(cfg, argument.src, bound)
    return load.selector if isinstance(load, LoadSel) else None


def argument_literals(cfg: Cfg, call_index: int) -> t.Dict[int, str]:
    """ String literals passed to the call, keyed by argument slot """
    literals = {}   # type: t.Dict[int, str]
    for slot, bound in argument_indices(cfg, call_index).items():
        argument = cfg.procedure[bound]
        if not isinstance(argument, Arg):
            continue
        load = trace_load(cfg, argument.src, bound)
        if isinstance(load, LoadStr):
            literals[slot] = load.literal
    return literals


def call_name(cfg: Cfg, call_index: int) -> t.Optional[str]:
    """ C symbol of a call, or its selector for ``objc_msgSend`` """
    call = cfg.procedure[call_index]
    if not isinstance(call, Call):
        return None
    if call.symbol == OBJC_MSGSEND:
        return resolve_selector(cfg, call_index)
    return call.symbol


class CallEdge(t.NamedTuple):
    caller: str
    site: int
    callee: str


class AmbiguousCall(t.NamedTuple):
    caller: str
    site: int
    selector: str
    candidates: t.Tuple[str, ...]


class CallGraph(t.NamedTuple):
    nodes: t.Tuple[str, ...]
    edges: t.Tuple[CallEdge, ...]
    ambiguous: t.Tuple[AmbiguousCall, ...] = ()

    def callee(self, caller: str, site: int) -> t.Optional[str]:
        for edge in self.edges:
            if edge.caller == caller and edge.site == site:
                return edge.callee
        return None

    def edges_from(self, caller: str) -> t.Tuple[CallEdge, ...]:
        return tuple(edge for edge in self.edges if edge.caller == caller)


def build_callgraph(
    listing: Listing, cfgs: t.Optional[t.Mapping[str, Cfg]] = None,
) -> CallGraph:
    """
    Link calls to procedures of the same listing.

    A direct call links when its symbol names a procedure. An
    ``objc_msgSend`` links when its selector equals the method part of
    exactly one bracketed procedure name; several candidates are recorded
    as ambiguous and left unlinked.
    """
    if cfgs is None:
        cfgs = {proc.name: build_cfg(proc) for proc in listing}

    names = set(listing.names)
    by_selector = {}    # type: t.Dict[str, t.List[str]]
    for proc in listing:
        if proc.selector is not None:
            by_selector.setdefault(proc.selector, []).append(proc.name)

    edges = []      # type: t.List[CallEdge]
    ambiguous = []  # type: t.List[AmbiguousCall]

    for proc in listing:
        cfg = cfgs[proc.name]
        for index, instruction in enumerate(proc.instructions):
            if not isinstance(instruction, Call):
                continue
            if instruction.symbol != OBJC_MSGSEND:
                if instruction.symbol in names:
                    edges.append(CallEdge(proc.name, index, instruction.symbol))
                continue

            selector = resolve_selector(cfg, index)
            candidates = by_selector.get(selector or "", [])
            if len(candidates) == 1:
                edges.append(CallEdge(proc.name, index, candidates[0]))
            elif len(candidates) > 1:
                log.debug(
                    "Selector %r at %s:%d matches %d procedures",
                    selector, proc.name, index, len(candidates),
                )
                ambiguous.append(AmbiguousCall(
                    proc.name, index, selector or "", tuple(candidates),
                ))

    return CallGraph(listing.names, tuple(edges), tuple(ambiguous))


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def cfg_to_dot(cfg: Cfg) -> str:
    """ Graphviz text of ``cfg``, unreachable blocks drawn dashed """
    reachable = reachable_blocks(cfg)
    lines = [
        "digraph \"{}\" {{".format(_dot_escape(cfg.name)),
        "    node [shape=box, fontname=monospace];",
    ]
    for block in cfg.blocks:
        body = "".join(
            "{}: {}\\l".format(
                index, _dot_escape(format_instruction(cfg.procedure[index])),
            )
            for index in block.indices
        )
        style = "" if block.id in reachable else ", style=dashed"
        lines.append(
            "    b{} [label=\"b{}\\l{}\"{}];".format(
                block.id, block.id, body, style,
            ),
        )
    for source, target in cfg.edges():
        lines.append("    b{} -> b{};".format(source, target))
    lines.append("}")
    return "\n".join(lines) + "\n"


__all__ = (
    "AmbiguousCall",
    "BasicBlock",
    "CallEdge",
    "CallGraph",
    "Cfg",
    "argument_indices",
    "argument_literals",
    "build_callgraph",
    "build_cfg",
    "call_arguments",
    "call_name",
    "cfg_to_dot",
    "feeding_call",
    "instruction_successors",
    "leaders",
    "reachable_blocks",
    "reachable_instructions",
    "resolve_selector",
    "trace_load",
    "written_locations",
)
