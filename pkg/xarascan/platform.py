import typing as t
from enum import Enum, unique


@unique
class Platform(str, Enum):
    osx = "osx"
    ios = "ios"

    @classmethod
    def choices(cls) -> t.Tuple[str, ...]:
        return tuple(cls._member_names_)    # type: ignore

    def __str__(self) -> str:
        return self.value


DEFAULT_PLATFORM = Platform.osx


__all__ = ("DEFAULT_PLATFORM", "Platform")
