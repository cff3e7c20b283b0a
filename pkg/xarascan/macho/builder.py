"""
Emitter of minimal, valid 64-bit Mach-O files used as test fixtures.

The builder lays the file out itself and records the ground truth of what
it wrote (section offsets, selector string addresses, imported names) into a
:class:`Manifest`, independently of the parser in :mod:`.image`.
"""
import struct
import typing as t
from collections import OrderedDict

from .constants import (
    CPU_TYPE_X86_64, FAT_ARCH, FAT_HEADER, FAT_MAGIC, LC_ENCRYPTION_INFO_64,
    LC_SEGMENT_64, LC_SYMTAB, MACH_HEADER_64, MH_EXECUTE, MH_MAGIC_64, N_EXT,
    N_SECT, N_UNDF, S_CSTRING_LITERALS, S_LITERAL_POINTERS, S_REGULAR,
    SECT_OBJC_METHNAME, SECT_OBJC_MSGREFS, SECT_OBJC_SELREFS, SECTION_64,
    SEGMENT_COMMAND_64, SYMTAB_COMMAND,
)


BASE_ADDRESS = 0x100000000
DANGLING_POINTER = 0xdead0000

_HEADER = struct.Struct(MACH_HEADER_64)
_SEGMENT = struct.Struct(SEGMENT_COMMAND_64)
_SECTION = struct.Struct(SECTION_64)
_SYMTAB = struct.Struct(SYMTAB_COMMAND)
_ENCRYPTION = struct.Struct("<IIIIII")
_NLIST = struct.Struct("<IBBHQ")
_FAT_HEADER = struct.Struct(FAT_HEADER)
_FAT_ARCH = struct.Struct(FAT_ARCH)


def _align(value: int, alignment: int) -> int:
    return (value + alignment - 1) // alignment * alignment


class ManifestEntry(t.NamedTuple):
    kind: str
    name: str
    address: int

    def __str__(self) -> str:
        return "{}\t{}\t0x{:x}".format(self.kind, self.name, self.address)


class Manifest:
    """ Ground truth of a built fixture, one entry per expected item """

    __slots__ = ("entries",)

    KINDS = frozenset(("section", "selector", "import", "defined", "dangling"))

    def __init__(self, entries: t.Iterable[ManifestEntry] = ()):
        self.entries = list(entries)

    def add(self, kind: str, name: str, address: int) -> None:
        if kind not in self.KINDS:
            raise ValueError("Unknown manifest kind %r" % kind)
        self.entries.append(ManifestEntry(kind, name, address))

    def of_kind(self, kind: str) -> t.List[ManifestEntry]:
        return [e for e in self.entries if e.kind == kind]

    def names(self, kind: str) -> t.FrozenSet[str]:
        return frozenset(e.name for e in self.of_kind(kind))

    @property
    def selectors(self) -> t.FrozenSet[t.Tuple[str, int]]:
        return frozenset((e.name, e.address) for e in self.of_kind("selector"))

    def render(self) -> str:
        return "".join("{}\n".format(entry) for entry in self.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Manifest):
            return NotImplemented
        return self.entries == other.entries

    def __repr__(self) -> str:
        return "<Manifest: %d entries>" % len(self.entries)


def parse_manifest(text: str) -> Manifest:
    manifest = Manifest()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            kind, name, address = line.split("\t")
            manifest.add(kind, name, int(address, 0))
        except ValueError as e:
            raise ValueError(
                "Bad manifest line %d: %r (%s)" % (lineno, line, e),
            ) from e
    return manifest


class _PendingSection:
    __slots__ = ("segment", "name", "payload", "flags", "offset")

    def __init__(self, segment: str, name: str, payload: bytes, flags: int):
        self.segment = segment
        self.name = name
        self.payload = payload
        self.flags = flags
        self.offset = 0

    @property
    def address(self) -> int:
        return BASE_ADDRESS + self.offset


class MachOBuilder:
    """
    Builds a thin x86_64 (or ARM64) executable image.

    >>> builder = MachOBuilder()
    >>> _ = builder.add_selectors("openURL:").add_imports("NSHomeDirectory")
    >>> data = builder.build()
    >>> sorted(builder.manifest.names("import"))
    ['NSHomeDirectory']
    """

    def __init__(self, cpu_type: int = CPU_TYPE_X86_64, cpu_subtype: int = 3):
        self.cpu_type = cpu_type
        self.cpu_subtype = cpu_subtype
        self.manifest = Manifest()

        self._sections = []     # type: t.List[_PendingSection]
        self._selectors = []    # type: t.List[str]
        self._message_refs = []     # type: t.List[str]
        self._dangling = []     # type: t.List[int]
        self._imports = []      # type: t.List[str]
        self._defined = []      # type: t.List[str]
        self._crypt_id = None   # type: t.Optional[int]

    def add_section(
        self, segment: str, name: str, payload: bytes = b"",
        flags: int = S_REGULAR,
    ) -> "MachOBuilder":
        if len(segment) > 16 or len(name) > 16:
            raise ValueError("segment and section names are 16 bytes max")
        self._sections.append(_PendingSection(segment, name, payload, flags))
        return self

    def add_selectors(self, *names: str) -> "MachOBuilder":
        self._selectors.extend(names)
        return self

    def add_message_refs(self, *names: str) -> "MachOBuilder":
        self._message_refs.extend(names)
        return self

    def add_dangling_selref(
        self, pointer: int = DANGLING_POINTER,
    ) -> "MachOBuilder":
        self._dangling.append(pointer)
        return self

    def add_imports(self, *names: str) -> "MachOBuilder":
        self._imports.extend(names)
        return self

    def add_defined(self, *names: str) -> "MachOBuilder":
        self._defined.extend(names)
        return self

    def set_encryption(self, crypt_id: int = 1) -> "MachOBuilder":
        self._crypt_id = crypt_id
        return self

    def _objc_sections(
        self,
    ) -> t.Tuple[t.List[_PendingSection], t.Dict[str, int]]:
        names = list(OrderedDict.fromkeys(
            self._selectors + self._message_refs,
        ))

        sections = []
        offsets = {}    # type: t.Dict[str, int]

        if names:
            payload = bytearray()
            for name in names:
                offsets[name] = len(payload)
                payload += name.encode("utf-8") + b"\0"

            sections.append(_PendingSection(
                "__TEXT", SECT_OBJC_METHNAME, bytes(payload),
                S_CSTRING_LITERALS,
            ))

        selref_count = len(self._selectors) + len(self._dangling)
        if selref_count:
            sections.append(_PendingSection(
                "__DATA", SECT_OBJC_SELREFS, bytes(8 * selref_count),
                S_LITERAL_POINTERS,
            ))

        if self._message_refs:
            sections.append(_PendingSection(
                "__DATA", SECT_OBJC_MSGREFS,
                bytes(16 * len(self._message_refs)), S_REGULAR,
            ))

        return sections, offsets

    def build(self) -> bytes:
        self.manifest = Manifest()
        objc_sections, name_offsets = self._objc_sections()

        segments = OrderedDict()    # type: t.Dict[str, t.List[_PendingSection]]
        for section in self._sections + objc_sections:
            segments.setdefault(section.segment, []).append(section)

        has_symbols = bool(self._imports or self._defined)

        sizeofcmds = sum(
            _SEGMENT.size + _SECTION.size * len(sections)
            for sections in segments.values()
        )
        ncmds = len(segments)

        if has_symbols:
            sizeofcmds += _SYMTAB.size
            ncmds += 1
        if self._crypt_id is not None:
            sizeofcmds += _ENCRYPTION.size
            ncmds += 1

        data_start = _align(_HEADER.size + sizeofcmds, 16)
        cursor = data_start
        segment_ranges = []

        for sections in segments.values():
            start = cursor
            for section in sections:
                cursor = _align(cursor, 8)
                section.offset = cursor
                cursor += len(section.payload)
            segment_ranges.append((start, cursor - start))

        methname = next(
            (s for s in objc_sections if s.name == SECT_OBJC_METHNAME), None,
        )

        for section in objc_sections:
            if section.name == SECT_OBJC_SELREFS:
                assert methname is not None or not self._selectors
                pointers = [
                    methname.address + name_offsets[name]   # type: ignore
                    for name in self._selectors
                ] + self._dangling
                section.payload = b"".join(
                    struct.pack("<Q", p) for p in pointers
                )
            elif section.name == SECT_OBJC_MSGREFS:
                section.payload = b"".join(
                    struct.pack(
                        "<QQ", 0,
                        methname.address + name_offsets[name],  # type: ignore
                    )
                    for name in self._message_refs
                )

        symbol_blob = b""
        symoff = stroff = strsize = 0
        nsyms = len(self._imports) + len(self._defined)

        if has_symbols:
            symoff = _align(cursor, 8)
            strings = bytearray(b"\0")
            entries = bytearray()

            for name in self._imports:
                entries += _NLIST.pack(len(strings), N_UNDF | N_EXT, 0, 0, 0)
                strings += b"_" + name.encode("utf-8") + b"\0"

            for name in self._defined:
                entries += _NLIST.pack(
                    len(strings), N_SECT | N_EXT, 1, 0,
                    BASE_ADDRESS + data_start,
                )
                strings += b"_" + name.encode("utf-8") + b"\0"

            stroff = symoff + len(entries)
            strsize = _align(len(strings), 8)
            symbol_blob = bytes(entries) + bytes(strings).ljust(strsize, b"\0")
            cursor = symoff + len(symbol_blob)

        out = bytearray(_align(cursor, 16))
        _HEADER.pack_into(
            out, 0, MH_MAGIC_64, self.cpu_type, self.cpu_subtype,
            MH_EXECUTE, ncmds, sizeofcmds, 0, 0,
        )

        command = _HEADER.size
        for (segment, sections), (seg_offset, seg_size) in zip(
            segments.items(), segment_ranges,
        ):
            cmdsize = _SEGMENT.size + _SECTION.size * len(sections)
            _SEGMENT.pack_into(
                out, command, LC_SEGMENT_64, cmdsize,
                segment.encode("ascii"), BASE_ADDRESS + seg_offset, seg_size,
                seg_offset, seg_size, 7, 5, len(sections), 0,
            )
            command += _SEGMENT.size

            for section in sections:
                _SECTION.pack_into(
                    out, command, section.name.encode("ascii"),
                    segment.encode("ascii"), section.address,
                    len(section.payload), section.offset, 3, 0, 0,
                    section.flags, 0, 0, 0,
                )
                command += _SECTION.size
                out[
                    section.offset:section.offset + len(section.payload)
                ] = section.payload
                self.manifest.add(
                    "section", "{},{}".format(segment, section.name),
                    section.offset,
                )

        if has_symbols:
            _SYMTAB.pack_into(
                out, command, LC_SYMTAB, _SYMTAB.size,
                symoff, nsyms, stroff, strsize,
            )
            command += _SYMTAB.size
            out[symoff:symoff + len(symbol_blob)] = symbol_blob

        if self._crypt_id is not None:
            _ENCRYPTION.pack_into(
                out, command, LC_ENCRYPTION_INFO_64, _ENCRYPTION.size,
                data_start, cursor - data_start, self._crypt_id, 0,
            )

        if methname is not None:
            for name, offset in name_offsets.items():
                self.manifest.add("selector", name, methname.address + offset)

        for pointer in self._dangling:
            self.manifest.add("dangling", "-", pointer)
        for name in OrderedDict.fromkeys(self._imports):
            self.manifest.add("import", name, 0)
        for name in OrderedDict.fromkeys(self._defined):
            self.manifest.add("defined", name, BASE_ADDRESS + data_start)

        return bytes(out)


def build_fat(*images: bytes, align: int = 12) -> bytes:
    """ Wrap thin images built by :class:`MachOBuilder` into a fat file """

    offset = _align(_FAT_HEADER.size + _FAT_ARCH.size * len(images), 1 << align)
    header = bytearray(_FAT_HEADER.pack(FAT_MAGIC, len(images)))
    body = bytearray()
    placements = []

    for image in images:
        cpu_type, cpu_subtype = struct.unpack_from("<ii", image, 4)
        placements.append((cpu_type, cpu_subtype, offset, len(image)))
        body += image.ljust(_align(len(image), 1 << align), b"\0")
        offset += _align(len(image), 1 << align)

    for cpu_type, cpu_subtype, slice_offset, size in placements:
        header += _FAT_ARCH.pack(
            cpu_type, cpu_subtype, slice_offset, size, align,
        )

    start = placements[0][2] if placements else len(header)
    return bytes(header.ljust(start, b"\0") + body)


__all__ = (
    "BASE_ADDRESS",
    "DANGLING_POINTER",
    "MachOBuilder",
    "Manifest",
    "ManifestEntry",
    "build_fat",
    "parse_manifest",
)
