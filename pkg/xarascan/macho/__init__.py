from .exceptions import (
    BadMagic, Encrypted, MachOError, MalformedLoadCommand, MalformedSymtab,
    Truncated,
)
from .image import MachOImage, Section, Segment, parse_image
from .quickscan import ChannelPresence, ChannelUsage, quick_scan
from .selectors import DanglingSelectorPointer, SelectorTable, extract_selectors
from .symbols import SymbolTable, extract_imports


__all__ = (
    "BadMagic",
    "ChannelPresence",
    "ChannelUsage",
    "DanglingSelectorPointer",
    "Encrypted",
    "MachOError",
    "MachOImage",
    "MalformedLoadCommand",
    "MalformedSymtab",
    "Section",
    "SelectorTable",
    "Segment",
    "SymbolTable",
    "Truncated",
    "extract_imports",
    "extract_selectors",
    "parse_image",
    "quick_scan",
)
