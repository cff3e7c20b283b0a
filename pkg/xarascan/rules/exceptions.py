import typing as t

from ..exceptions import XaraError


class RulesError(XaraError):
    def __init__(
        self, message: str, path: t.Optional[str] = None,
        line: t.Optional[int] = None,
    ):
        self.message = message
        self.path = path
        self.line = line
        super().__init__(message)

    def __str__(self) -> str:
        location = ":".join(
            str(part) for part in (self.path, self.line) if part is not None
        )
        if not location:
            return self.message
        return "{}: {}".format(location, self.message)


class SchemaError(RulesError):
    pass


class DuplicateChannel(RulesError):
    pass


class BadBinding(RulesError):
    pass


__all__ = ("BadBinding", "DuplicateChannel", "RulesError", "SchemaError")
