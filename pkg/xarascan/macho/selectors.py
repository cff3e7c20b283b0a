import logging
import struct
import typing as t

from .constants import (
    S_CSTRING_LITERALS, SECT_OBJC_METHNAME, SECT_OBJC_MSGREFS,
    SECT_OBJC_SELREFS,
)
from .image import MachOImage, Section


log = logging.getLogger(__name__)

_POINTER = struct.Struct("<Q")
# message_ref_t: (IMP imp, SEL sel)
_MESSAGE_REF = struct.Struct("<QQ")


class DanglingSelectorPointer(t.NamedTuple):
    section: str
    index: int
    pointer: int
    reason: str

    def __str__(self) -> str:
        return "{}[{}] -> 0x{:x}: {}".format(
            self.section, self.index, self.pointer, self.reason,
        )


class SelectorTable(t.NamedTuple):
    selectors: t.FrozenSet[t.Tuple[str, int]]
    dangling: t.Tuple[DanglingSelectorPointer, ...] = ()

    @property
    def names(self) -> t.FrozenSet[str]:
        return frozenset(name for name, _ in self.selectors)

    def __contains__(self, name: object) -> bool:
        return name in self.names


def _cstring_sections(image: MachOImage) -> t.Tuple[Section, ...]:
    return tuple(
        section for section in image.sections
        if not section.is_zerofill and (
            section.section_name == SECT_OBJC_METHNAME or
            section.type == S_CSTRING_LITERALS
        )
    )


class _Resolver:
    __slots__ = ("image", "sections", "dangling")

    def __init__(self, image: MachOImage):
        self.image = image
        self.sections = _cstring_sections(image)
        self.dangling = []  # type: t.List[DanglingSelectorPointer]

    def resolve(
        self, origin: Section, index: int, pointer: int,
    ) -> t.Optional[t.Tuple[str, int]]:
        def dangle(reason: str) -> None:
            entry = DanglingSelectorPointer(
                section=str(origin), index=index,
                pointer=pointer, reason=reason,
            )
            log.debug("Dangling selector pointer %s", entry)
            self.dangling.append(entry)

        for section in self.sections:
            if not section.contains_address(pointer):
                continue

            start = section.file_offset + (pointer - section.vm_addr)
            end = self.image.data.find(
                b"\0", start, section.file_offset + section.size,
            )

            if end < 0:
                dangle("string is not NUL-terminated")
                return None
            if end == start:
                dangle("empty selector string")
                return None

            raw = self.image.data[start:end]
            return raw.decode("utf-8", "surrogateescape"), pointer

        dangle("pointer is outside of any cstring section")
        return None


def _pointer_slots(
    image: MachOImage, section: Section, layout: struct.Struct,
) -> t.Iterator[t.Tuple[int, t.Tuple[int, ...]]]:
    count, rest = divmod(section.size, layout.size)
    if rest:
        log.warning(
            "Section %s size %d is not a multiple of %d, "
            "ignoring %d trailing bytes",
            section, section.size, layout.size, rest,
        )

    for idx in range(count):
        yield idx, layout.unpack_from(
            image.data, section.file_offset + idx * layout.size,
        )


def extract_selectors(image: MachOImage) -> SelectorTable:
    """
    Collect Objective-C selectors referenced by ``__objc_selrefs`` and
    ``__objc_msgrefs``.

    Every pointer is resolved against the cstring sections of the image.
    Pointers which do not resolve are reported in
    :attr:`SelectorTable.dangling` instead of aborting the extraction.
    """

    resolver = _Resolver(image)
    found = set()  # type: t.Set[t.Tuple[str, int]]

    for section in image.sections_named(SECT_OBJC_SELREFS):
        if section.is_zerofill:
            continue
        for idx, (pointer,) in _pointer_slots(image, section, _POINTER):
            selector = resolver.resolve(section, idx, pointer)
            if selector is not None:
                found.add(selector)

    for section in image.sections_named(SECT_OBJC_MSGREFS):
        if section.is_zerofill:
            continue
        for idx, (_, pointer) in _pointer_slots(
            image, section, _MESSAGE_REF,
        ):
            selector = resolver.resolve(section, idx, pointer)
            if selector is not None:
                found.add(selector)

    return SelectorTable(
        selectors=frozenset(found),
        dangling=tuple(resolver.dangling),
    )


__all__ = (
    "DanglingSelectorPointer",
    "SelectorTable",
    "extract_selectors",
)
