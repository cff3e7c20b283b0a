"""
Parser of NAIF, the normalized assembly listing the deep analyzer reads.

Example::

    # naif-version: 1
    .proc "[ENKeychainHelper saveValue:toKeyChainItem:]"
        0: argaddr 3, sp[-48]
        1: call "SecKeychainFindGenericPassword"
        2: arg 0, sp[-48]
        3: call "SecKeychainItemModifyAttributesAndData"
        4: ret
    .endproc
"""
import logging
import re
import typing as t

from .exceptions import (
    BadLocation, DanglingBranch, DuplicateIndex, DuplicateProc,
    ListingError, NaifSyntaxError,
)
from .types import (
    MAX_ARG_INDEX, REGISTERS, STACK_LIMIT, Arg, ArgAddr, Br, Call,
    Instruction, Jmp, Listing, LoadImm, LoadSel, LoadStr, Location, Move,
    Procedure, Reg, Ret, Stack,
)


log = logging.getLogger(__name__)

NAIF_HEADER = "# naif-version: 1"
_HEADER_PREFIX = "# naif-version:"

_TOKEN = re.compile(
    r'\s*(?:(?P<string>"(?:[^"\\]|\\.)*")'
    r'|(?P<comment>#.*)'
    r'|(?P<comma>,)'
    r'|(?P<word>[^\s,"#]+))',
)
_STACK = re.compile(r"sp\[([+-]?(?:0[xX][0-9a-fA-F]+|\d+))\]\Z")
_INDEX = re.compile(r"(\d+):\Z")
_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t", "r": "\r"}


class _Str(str):
    """ Token that was written as a quoted string """


def _unescape(body: str) -> str:
    result = []
    chars = iter(body)
    for char in chars:
        if char != "\\":
            result.append(char)
            continue

        escape = next(chars, "")
        if escape in _ESCAPES:
            result.append(_ESCAPES[escape])
        elif escape == "x":
            digits = next(chars, "") + next(chars, "")
            if not re.fullmatch(r"[0-9a-fA-F]{2}", digits):
                raise NaifSyntaxError(
                    "bad \\x escape in string literal",
                )
            result.append(chr(int(digits, 16)))
        else:
            raise NaifSyntaxError(
                "unknown escape \\{} in string literal".format(escape),
            )
    return "".join(result)


def tokenize(line: str) -> t.List[str]:
    tokens = []     # type: t.List[str]
    position = 0
    while position < len(line):
        if not line[position:].strip():
            break
        match = _TOKEN.match(line, position)
        if match is None:
            raise NaifSyntaxError("unterminated string literal")
        position = match.end()
        if match.group("comment") is not None:
            break
        if match.group("string") is not None:
            tokens.append(_Str(_unescape(match.group("string")[1:-1])))
        else:
            tokens.append(match.group("comma") or match.group("word"))
    return tokens


def parse_location(text: str) -> Location:
    if isinstance(text, _Str):
        raise BadLocation("expected a location, got a string literal")
    if text in REGISTERS:
        return Reg(text)
    match = _STACK.match(text)
    if match is None:
        raise BadLocation("unknown location {!r}".format(text))
    try:
        offset = int(match.group(1), 0)
    except ValueError:
        raise BadLocation(
            "bad stack offset {!r}".format(match.group(1)),
        ) from None
    if not -STACK_LIMIT <= offset < STACK_LIMIT:
        raise BadLocation("stack offset {} out of range".format(offset))
    return Stack(offset)


def _word(text: str, what: str) -> str:
    if isinstance(text, _Str):
        raise NaifSyntaxError("expected {}, got a string literal".format(what))
    return text


def _string(text: str, what: str) -> str:
    if not isinstance(text, _Str):
        raise NaifSyntaxError(
            "expected quoted {}, got {!r}".format(what, text),
        )
    return str(text)


def _integer(text: str, what: str) -> int:
    try:
        return int(_word(text, what), 0)
    except ValueError:
        raise NaifSyntaxError(
            "expected {}, got {!r}".format(what, text),
        ) from None


def _arg_index(text: str) -> int:
    index = _integer(text, "argument index")
    if not 0 <= index <= MAX_ARG_INDEX:
        raise NaifSyntaxError(
            "argument index {} out of range 0..{}".format(index, MAX_ARG_INDEX),
        )
    return index


def _operands(
    tokens: t.Sequence[str], count: int, mnemonic: str,
) -> t.List[str]:
    operands = list(tokens[0::2])
    separators = tokens[1::2]
    if (
        len(operands) != count or
        any(sep != "," or isinstance(sep, _Str) for sep in separators) or
        (tokens and tokens[-1] == "," and not isinstance(tokens[-1], _Str))
    ):
        raise NaifSyntaxError(
            "{} takes {} comma separated operand(s)".format(mnemonic, count),
        )
    return operands


def _label(text: str) -> int:
    index = _integer(text, "instruction index")
    if index < 0:
        raise NaifSyntaxError("negative instruction index")
    return index


def parse_instruction(mnemonic: str, tokens: t.Sequence[str]) -> Instruction:
    if mnemonic == "ret":
        _operands(tokens, 0, mnemonic)
        return Ret()
    if mnemonic in ("jmp", "br"):
        target, = _operands(tokens, 1, mnemonic)
        return (Jmp if mnemonic == "jmp" else Br)(_label(target))
    if mnemonic == "call":
        symbol = _string(_operands(tokens, 1, mnemonic)[0], "symbol")
        if not symbol:
            raise NaifSyntaxError("empty call symbol")
        return Call(symbol)

    first, second = _operands(tokens, 2, mnemonic)

    if mnemonic == "mov":
        return Move(parse_location(first), parse_location(second))
    if mnemonic == "sel":
        return LoadSel(parse_location(first), _string(second, "selector"))
    if mnemonic == "str":
        return LoadStr(parse_location(first), _string(second, "literal"))
    if mnemonic == "imm":
        return LoadImm(parse_location(first), _integer(second, "integer"))
    if mnemonic == "arg":
        return Arg(_arg_index(first), parse_location(second))
    if mnemonic == "argaddr":
        slot = parse_location(second)
        if not isinstance(slot, Stack):
            raise BadLocation("argaddr slot must be a stack location")
        return ArgAddr(_arg_index(first), slot)

    raise NaifSyntaxError("unknown mnemonic {!r}".format(mnemonic))


class _ProcDraft:
    __slots__ = ("name", "line", "instructions", "lines")

    def __init__(self, name: str, line: int):
        self.name = name
        self.line = line
        self.instructions = []  # type: t.List[Instruction]
        self.lines = []         # type: t.List[int]

    def add(self, index: int, instruction: Instruction, line: int) -> None:
        expected = len(self.instructions)
        if index < expected:
            raise DuplicateIndex(
                "instruction index {} repeated".format(index),
            )
        if index > expected:
            raise NaifSyntaxError(
                "expected instruction index {}, got {}".format(
                    expected, index,
                ),
            )
        self.instructions.append(instruction)
        self.lines.append(line)

    def finish(self) -> Procedure:
        if not self.instructions:
            raise NaifSyntaxError(
                "procedure {!r} has no instructions".format(self.name),
                line=self.line,
            )
        size = len(self.instructions)
        for instruction, line in zip(self.instructions, self.lines):
            branch = isinstance(instruction, (Jmp, Br))
            if branch and instruction.target >= size:   # type: ignore
                raise DanglingBranch(
                    "branch target {} outside procedure {!r}".format(
                        instruction.target, self.name,
                    ),
                    line=line,
                )
        return Procedure(self.name, tuple(self.instructions))


def parse_listing(text: str, source_name: str = "<naif>") -> Listing:
    """
    Parse NAIF text into a :class:`Listing`.

    Errors are :class:`ListingError` subclasses carrying the 1-based
    ``line`` of the offending input line. Text holding only blank lines and
    comments parses to an empty listing.
    """
    header_seen = False
    procedures = []     # type: t.List[Procedure]
    names = set()       # type: t.Set[str]
    current = None      # type: t.Optional[_ProcDraft]
    lineno = 0

    try:
        for lineno, raw in enumerate(text.split("\n"), 1):
            line = raw.rstrip("\r")
            stripped = line.strip()

            if stripped.startswith(_HEADER_PREFIX):
                if stripped != NAIF_HEADER:
                    raise NaifSyntaxError(
                        "unsupported version header {!r}".format(stripped),
                    )
                header_seen = True
                continue

            tokens = tokenize(line)
            if not tokens:
                continue

            if not header_seen:
                raise NaifSyntaxError(
                    "missing {!r} header line".format(NAIF_HEADER),
                )

            head, rest = tokens[0], tokens[1:]

            if head == ".proc" and not isinstance(head, _Str):
                if current is not None:
                    raise NaifSyntaxError(
                        "nested .proc inside {!r}".format(current.name),
                    )
                if len(rest) != 1:
                    raise NaifSyntaxError(".proc takes one quoted name")
                name = _string(rest[0], "procedure name")
                if not name:
                    raise NaifSyntaxError("empty procedure name")
                if name in names:
                    raise DuplicateProc(
                        "procedure {!r} defined twice".format(name),
                    )
                names.add(name)
                current = _ProcDraft(name, lineno)
                continue

            if head == ".endproc" and not isinstance(head, _Str):
                if current is None or rest:
                    raise NaifSyntaxError("unexpected .endproc")
                procedures.append(current.finish())
                current = None
                continue

            if current is None:
                raise NaifSyntaxError("instruction outside of a procedure")

            match = _INDEX.match(_word(head, "instruction index"))
            if match is None or not rest:
                raise NaifSyntaxError(
                    "expected '<index>: <mnemonic> <operands>'",
                )
            mnemonic = _word(rest[0], "mnemonic")
            current.add(
                int(match.group(1)),
                parse_instruction(mnemonic, rest[1:]),
                lineno,
            )

        if current is not None:
            raise NaifSyntaxError(
                "procedure {!r} is missing .endproc".format(current.name),
                line=current.line,
            )
    except ListingError as e:
        if e.line is None:
            e.line = lineno
        e.source = source_name
        raise

    log.debug(
        "Parsed %d procedure(s) from %s", len(procedures), source_name,
    )
    return Listing(tuple(procedures), source_name)


__all__ = (
    "NAIF_HEADER",
    "parse_instruction",
    "parse_listing",
    "parse_location",
    "tokenize",
)
