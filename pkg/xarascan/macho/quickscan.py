import logging
import typing as t

from ..rules import ApiKind, Channel, Role, RuleSet
from .image import MachOImage
from .selectors import SelectorTable, extract_selectors
from .symbols import SymbolTable, extract_imports


log = logging.getLogger(__name__)


class ChannelPresence(t.NamedTuple):
    present: bool
    matched_names: t.Tuple[str, ...] = ()


class ChannelUsage(t.NamedTuple):
    channels: t.Tuple[t.Tuple[Channel, ChannelPresence], ...]

    def __getitem__(self, channel: t.Union[Channel, str]) -> ChannelPresence:
        channel = Channel(channel)
        for key, presence in self.channels:
            if key is channel:
                return presence
        raise KeyError(channel)

    @property
    def present(self) -> t.Tuple[Channel, ...]:
        return tuple(
            channel for channel, presence in self.channels
            if presence.present
        )

    def as_dict(self) -> t.Dict[str, t.Dict[str, t.Any]]:
        return {
            channel.value: {
                "present": presence.present,
                "matched": list(presence.matched_names),
            }
            for channel, presence in self.channels
        }


def quick_scan(
    image: MachOImage, rules: RuleSet,
    selectors: t.Optional[SelectorTable] = None,
    symbols: t.Optional[SymbolTable] = None,
) -> ChannelUsage:
    """
    Tell which channels an image touches before any deep analysis.

    A channel is present when one of its claim or use names occurs in the
    image: C names are looked up in the imported symbols, Objective-C names
    in the selector table. Literal and wildcard signatures carry no name to
    look for and are skipped.
    """
    if selectors is None:
        selectors = extract_selectors(image)
    if symbols is None:
        symbols = extract_imports(image)

    names = {
        ApiKind.c: symbols.imported,
        ApiKind.objc: selectors.names,
    }   # type: t.Dict[ApiKind, t.FrozenSet[str]]

    result = []
    for rule in rules:
        matched = sorted({
            sig.name
            for role, sig in rule.signatures()
            if role in (Role.claim, Role.use)
            and sig.kind in names
            and sig.name in names[sig.kind]
        })
        presence = ChannelPresence(bool(matched), tuple(matched))
        result.append((rule.channel, presence))

    usage = ChannelUsage(tuple(result))
    log.debug(
        "Quick scan found channels: %s",
        ", ".join(str(c) for c in usage.present) or "none",
    )
    return usage


__all__ = ("ChannelPresence", "ChannelUsage", "quick_scan")
