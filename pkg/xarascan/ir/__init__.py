from .exceptions import (
    BadLocation, DanglingBranch, DuplicateIndex, DuplicateProc,
    ListingError, NaifSyntaxError,
)
from .parser import NAIF_HEADER, parse_listing, parse_location
from .printer import print_listing, print_procedure
from .types import (
    OBJC_MSGSEND, RV, Arg, ArgAddr, Br, Call, Instruction, Jmp, Listing,
    LoadImm, LoadSel, LoadStr, Location, Move, Procedure, Reg, Ret, Stack,
    reg,
)


__all__ = (
    "Arg",
    "ArgAddr",
    "BadLocation",
    "Br",
    "Call",
    "DanglingBranch",
    "DuplicateIndex",
    "DuplicateProc",
    "Instruction",
    "Jmp",
    "Listing",
    "ListingError",
    "LoadImm",
    "LoadSel",
    "LoadStr",
    "Location",
    "Move",
    "NAIF_HEADER",
    "NaifSyntaxError",
    "OBJC_MSGSEND",
    "Procedure",
    "RV",
    "Reg",
    "Ret",
    "Stack",
    "parse_listing",
    "parse_location",
    "print_listing",
    "print_procedure",
    "reg",
)
