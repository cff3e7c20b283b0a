import typing as t

from .parser import NAIF_HEADER
from .types import (
    Arg, ArgAddr, Br, Call, Instruction, Jmp, Listing, LoadImm, LoadSel,
    LoadStr, Move, Procedure, Ret,
)


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"}


def quote(value: str) -> str:
    result = []
    for char in value:
        if char in _ESCAPES:
            result.append(_ESCAPES[char])
        elif ord(char) < 0x20 or ord(char) == 0x7f:
            result.append("\\x{:02x}".format(ord(char)))
        else:
            result.append(char)
    return '"{}"'.format("".join(result))


def format_instruction(instruction: Instruction) -> str:
    if isinstance(instruction, Move):
        return "mov {}, {}".format(instruction.dst, instruction.src)
    if isinstance(instruction, LoadSel):
        return "sel {}, {}".format(instruction.dst, quote(instruction.selector))
    if isinstance(instruction, LoadStr):
        return "str {}, {}".format(instruction.dst, quote(instruction.literal))
    if isinstance(instruction, LoadImm):
        return "imm {}, {}".format(instruction.dst, instruction.value)
    if isinstance(instruction, Arg):
        return "arg {}, {}".format(instruction.index, instruction.src)
    if isinstance(instruction, ArgAddr):
        return "argaddr {}, {}".format(instruction.index, instruction.slot)
    if isinstance(instruction, Call):
        return "call {}".format(quote(instruction.symbol))
    if isinstance(instruction, Jmp):
        return "jmp {}".format(instruction.target)
    if isinstance(instruction, Br):
        return "br {}".format(instruction.target)
    if isinstance(instruction, Ret):
        return "ret"
    raise TypeError("Not an instruction: {!r}".format(instruction))


def print_procedure(procedure: Procedure) -> t.List[str]:
    lines = [".proc {}".format(quote(procedure.name))]
    lines.extend(
        "    {}: {}".format(index, format_instruction(instruction))
        for index, instruction in enumerate(procedure.instructions)
    )
    lines.append(".endproc")
    return lines


def print_listing(listing: Listing) -> str:
    """ Canonical NAIF text of ``listing`` """
    lines = [NAIF_HEADER]
    for procedure in listing:
        lines.append("")
        lines.extend(print_procedure(procedure))
    return "\n".join(lines) + "\n"


__all__ = (
    "format_instruction", "print_listing", "print_procedure", "quote",
)
