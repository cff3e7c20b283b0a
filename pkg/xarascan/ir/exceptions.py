import typing as t

from ..exceptions import XaraError


class ListingError(XaraError):
    def __init__(
        self, message: str, line: t.Optional[int] = None,
        source: t.Optional[str] = None,
    ):
        self.message = message
        self.line = line
        self.source = source
        super().__init__(message)

    def __str__(self) -> str:
        location = ":".join(
            str(part) for part in (self.source, self.line) if part is not None
        )
        if not location:
            return self.message
        return "{}: {}".format(location, self.message)


class NaifSyntaxError(ListingError):
    pass


class DuplicateProc(ListingError):
    pass


class DuplicateIndex(ListingError):
    pass


class DanglingBranch(ListingError):
    pass


class BadLocation(ListingError):
    pass


__all__ = (
    "BadLocation",
    "DanglingBranch",
    "DuplicateIndex",
    "DuplicateProc",
    "ListingError",
    "NaifSyntaxError",
)
