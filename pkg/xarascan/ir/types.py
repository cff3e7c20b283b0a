import typing as t
from dataclasses import dataclass, field


REGISTERS = tuple("r{}".format(i) for i in range(16)) + ("rv",)
MAX_ARG_INDEX = 15
STACK_LIMIT = 2 ** 31

OBJC_MSGSEND = "objc_msgSend"


class Reg(t.NamedTuple):
    name: str

    def __str__(self) -> str:
        return self.name


class Stack(t.NamedTuple):
    offset: int

    def __str__(self) -> str:
        return "sp[{}]".format(self.offset)


Location = t.Union[Reg, Stack]

RV = Reg("rv")


def reg(index: int) -> Reg:
    return Reg("r{}".format(index))


@dataclass(frozen=True)
class Move:
    dst: Location
    src: Location


@dataclass(frozen=True)
class LoadSel:
    dst: Location
    selector: str


@dataclass(frozen=True)
class LoadStr:
    dst: Location
    literal: str


@dataclass(frozen=True)
class LoadImm:
    dst: Location
    value: int


@dataclass(frozen=True)
class Arg:
    index: int
    src: Location


@dataclass(frozen=True)
class ArgAddr:
    """ Passes the address of a stack slot, the slot is written by the call """
    index: int
    slot: Stack


@dataclass(frozen=True)
class Call:
    symbol: str


@dataclass(frozen=True)
class Jmp:
    target: int


@dataclass(frozen=True)
class Br:
    """ Two-way branch: falls through or jumps to ``target`` """
    target: int


@dataclass(frozen=True)
class Ret:
    pass


Instruction = t.Union[
    Move, LoadSel, LoadStr, LoadImm, Arg, ArgAddr, Call, Jmp, Br, Ret,
]
LOADS = (LoadSel, LoadStr, LoadImm)
TERMINATORS = (Jmp, Br, Ret)


def defined_location(instruction: Instruction) -> t.Optional[Location]:
    """ Location overwritten by a non-call instruction """
    if isinstance(instruction, (Move,) + LOADS):
        return instruction.dst   # type: ignore
    return None


@dataclass(frozen=True)
class Procedure:
    name: str
    instructions: t.Tuple[Instruction, ...]

    def __len__(self) -> int:
        return len(self.instructions)

    def __getitem__(self, index: int) -> Instruction:
        return self.instructions[index]

    @property
    def selector(self) -> t.Optional[str]:
        """
        Method part of an Objective-C procedure name, e.g. ``foo:bar:``
        for ``[Class foo:bar:]`` or ``-[Class foo:bar:]``.
        """
        name = self.name.lstrip("+-")
        if not (name.startswith("[") and name.endswith("]")):
            return None
        _, sep, selector = name[1:-1].partition(" ")
        if not sep or not selector.strip():
            return None
        return selector.strip()


@dataclass(frozen=True)
class Listing:
    procedures: t.Tuple[Procedure, ...] = ()
    source_name: str = field(default="<naif>", compare=False)

    def __iter__(self) -> t.Iterator[Procedure]:
        return iter(self.procedures)

    def __len__(self) -> int:
        return len(self.procedures)

    @property
    def names(self) -> t.Tuple[str, ...]:
        return tuple(proc.name for proc in self.procedures)

    def procedure(self, name: str) -> Procedure:
        for proc in self.procedures:
            if proc.name == name:
                return proc
        raise KeyError(name)


__all__ = (
    "Arg",
    "ArgAddr",
    "Br",
    "Call",
    "Instruction",
    "Jmp",
    "LOADS",
    "Listing",
    "LoadImm",
    "LoadSel",
    "LoadStr",
    "Location",
    "MAX_ARG_INDEX",
    "Move",
    "OBJC_MSGSEND",
    "Procedure",
    "REGISTERS",
    "RV",
    "Reg",
    "Ret",
    "STACK_LIMIT",
    "Stack",
    "TERMINATORS",
    "defined_location",
    "reg",
)
