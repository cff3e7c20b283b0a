import typing as t

from ..exceptions import XaraError


class MachOError(XaraError):
    """ Any structural problem of a Mach-O input """

    def __init__(self, message: str, offset: t.Optional[int] = None):
        self.message = message
        self.offset = offset
        super().__init__(message)

    def __str__(self) -> str:
        if self.offset is None:
            return self.message
        return "{} (at offset 0x{:x})".format(self.message, self.offset)


class BadMagic(MachOError):
    pass


class Truncated(MachOError):
    pass


class Encrypted(MachOError):
    pass


class MalformedLoadCommand(MachOError):
    pass


class MalformedSymtab(MachOError):
    pass


__all__ = (
    "BadMagic",
    "Encrypted",
    "MachOError",
    "MalformedLoadCommand",
    "MalformedSymtab",
    "Truncated",
)
