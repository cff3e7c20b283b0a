import typing as t

from ..exceptions import XaraError


class SimulationError(XaraError):
    """ Root of the simulator errors """

    def __init__(self, message: str, position: t.Optional[int] = None):
        self.message = message
        self.position = position
        super().__init__(message)

    def __str__(self) -> str:
        if self.position is None:
            return self.message
        return "event {}: {}".format(self.position, self.message)


class MalformedEvent(SimulationError):
    pass


class ScenarioSyntaxError(SimulationError):
    def __init__(
        self, message: str, line: t.Optional[int] = None,
        source: t.Optional[str] = None,
    ):
        super().__init__(message, position=line)
        self.line = line
        self.source = source

    def __str__(self) -> str:
        where = [str(part) for part in (self.source, self.line) if part]
        if not where:
            return self.message
        return "{}: {}".format(":".join(where), self.message)


__all__ = (
    "MalformedEvent",
    "ScenarioSyntaxError",
    "SimulationError",
)
