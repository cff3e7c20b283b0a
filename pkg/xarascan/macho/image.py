import logging
import struct
import typing as t

from .constants import (
    ENCRYPTION_INFO_COMMAND, FAT_ARCH, FAT_ARCH_64, FAT_HEADER, FAT_MAGIC,
    FAT_MAGIC_64, LC_ENCRYPTION_INFO, LC_ENCRYPTION_INFO_64, LC_SEGMENT_64,
    LC_SYMTAB, LOAD_COMMAND, MACH_HEADER_64, MAX_FAT_ARCHS, MH_CIGAM,
    MH_CIGAM_64, MH_MAGIC, MH_MAGIC_64, NLIST_64, SECTION_64, SECTION_TYPE,
    SEGMENT_COMMAND_64, SYMTAB_COMMAND, ZEROFILL_TYPES,
)
from .exceptions import (
    BadMagic, Encrypted, MalformedLoadCommand, MalformedSymtab, Truncated,
)


log = logging.getLogger(__name__)

_MAGIC = struct.Struct("<I")
_MAGIC_BE = struct.Struct(">I")
_HEADER = struct.Struct(MACH_HEADER_64)
_LOAD_COMMAND = struct.Struct(LOAD_COMMAND)
_SEGMENT = struct.Struct(SEGMENT_COMMAND_64)
_SECTION = struct.Struct(SECTION_64)
_SYMTAB = struct.Struct(SYMTAB_COMMAND)
_ENCRYPTION = struct.Struct(ENCRYPTION_INFO_COMMAND)
_NLIST = struct.Struct(NLIST_64)
_FAT_HEADER = struct.Struct(FAT_HEADER)
_FAT_ARCH = struct.Struct(FAT_ARCH)
_FAT_ARCH_64 = struct.Struct(FAT_ARCH_64)

NLIST_SIZE = _NLIST.size


class LoadCommand(t.NamedTuple):
    cmd: int
    size: int
    offset: int


class Section(t.NamedTuple):
    segment_name: str
    section_name: str
    file_offset: int
    size: int
    vm_addr: int
    flags: int = 0

    @property
    def type(self) -> int:
        return self.flags & SECTION_TYPE

    @property
    def is_zerofill(self) -> bool:
        return self.type in ZEROFILL_TYPES

    def contains_address(self, address: int) -> bool:
        return self.vm_addr <= address < self.vm_addr + self.size

    def __str__(self) -> str:
        return "{},{}".format(self.segment_name, self.section_name)


class Segment(t.NamedTuple):
    name: str
    vm_addr: int
    vm_size: int
    file_offset: int
    file_size: int
    sections: t.Tuple[Section, ...]


class SymtabCommand(t.NamedTuple):
    symbol_offset: int
    symbol_count: int
    string_offset: int
    string_size: int


class MachOImage(t.NamedTuple):
    magic: int
    cpu_type: int
    cpu_subtype: int
    file_type: int
    load_commands: t.Tuple[LoadCommand, ...]
    segments: t.Tuple[Segment, ...]
    sections: t.Tuple[Section, ...]
    symtab: t.Optional[SymtabCommand]
    encryption_flag: bool
    data: bytes

    def sections_named(self, name: str) -> t.Tuple[Section, ...]:
        return tuple(s for s in self.sections if s.section_name == name)

    def section(
        self, name: str, segment: t.Optional[str] = None,
    ) -> t.Optional[Section]:
        for section in self.sections_named(name):
            if segment is None or section.segment_name == segment:
                return section
        return None

    def read(self, offset: int, size: int) -> bytes:
        if offset < 0 or size < 0 or offset + size > len(self.data):
            raise Truncated(
                "read of {} bytes outside of the image".format(size), offset,
            )
        return self.data[offset:offset + size]


def _unpack(
    layout: struct.Struct, data: bytes, offset: int, what: str,
    error: t.Type[Exception] = Truncated,
) -> t.Tuple[t.Any, ...]:
    if offset < 0 or offset + layout.size > len(data):
        raise error("{} does not fit in the input".format(what), offset)
    return layout.unpack_from(data, offset)


def _name(raw: bytes) -> str:
    return raw.split(b"\0", 1)[0].decode("utf-8", "replace")


def _check_magic(magic: int, offset: int = 0) -> None:
    if magic == MH_MAGIC_64:
        return
    if magic in (MH_MAGIC, MH_CIGAM):
        raise BadMagic(
            "32-bit Mach-O images are not supported, only 64-bit "
            "little-endian images are", offset,
        )
    if magic == MH_CIGAM_64:
        raise BadMagic(
            "big-endian Mach-O images are not supported", offset,
        )
    raise BadMagic("unknown magic 0x{:08x}".format(magic), offset)


def _parse_segment(
    data: bytes, command: LoadCommand,
) -> Segment:
    if command.size < _SEGMENT.size:
        raise MalformedLoadCommand(
            "LC_SEGMENT_64 is shorter than its fixed part", command.offset,
        )

    (
        _, _, raw_name, vm_addr, vm_size, file_offset, file_size,
        _, _, nsects, _,
    ) = _SEGMENT.unpack_from(data, command.offset)
    name = _name(raw_name)

    if command.size < _SEGMENT.size + nsects * _SECTION.size:
        raise MalformedLoadCommand(
            "segment {!r} declares {} sections which do not fit in "
            "its load command".format(name, nsects), command.offset,
        )

    if file_offset + file_size > len(data):
        raise Truncated(
            "segment {!r} extends past the end of the input".format(name),
            file_offset,
        )

    sections = []
    cursor = command.offset + _SEGMENT.size

    for _ in range(nsects):
        (
            raw_sect, raw_seg, addr, size, offset, _, _, _, flags, _, _, _,
        ) = _SECTION.unpack_from(data, cursor)
        section = Section(
            segment_name=_name(raw_seg),
            section_name=_name(raw_sect),
            file_offset=offset,
            size=size,
            vm_addr=addr,
            flags=flags,
        )
        cursor += _SECTION.size

        if section.is_zerofill or section.size == 0:
            sections.append(section)
            continue

        if offset + size > len(data):
            raise Truncated(
                "section {} extends past the end of the input".format(
                    section,
                ), offset,
            )

        if offset < file_offset or offset + size > file_offset + file_size:
            raise MalformedLoadCommand(
                "section {} extends beyond segment {!r}".format(
                    section, name,
                ), offset,
            )

        sections.append(section)

    return Segment(
        name=name,
        vm_addr=vm_addr,
        vm_size=vm_size,
        file_offset=file_offset,
        file_size=file_size,
        sections=tuple(sections),
    )


def _parse_symtab(data: bytes, command: LoadCommand) -> SymtabCommand:
    if command.size < _SYMTAB.size:
        raise MalformedLoadCommand(
            "LC_SYMTAB is shorter than its fixed part", command.offset,
        )

    _, _, symoff, nsyms, stroff, strsize = _SYMTAB.unpack_from(
        data, command.offset,
    )

    if symoff + nsyms * NLIST_SIZE > len(data):
        raise Truncated("symbol table extends past the input", symoff)

    if stroff + strsize > len(data):
        raise Truncated("string table extends past the input", stroff)

    return SymtabCommand(
        symbol_offset=symoff,
        symbol_count=nsyms,
        string_offset=stroff,
        string_size=strsize,
    )


def _parse_thin(data: bytes) -> MachOImage:
    magic, = _unpack(_MAGIC, data, 0, "magic number")
    _check_magic(magic)

    (
        magic, cpu_type, cpu_subtype, file_type, ncmds, sizeofcmds, _, _,
    ) = _unpack(_HEADER, data, 0, "mach_header_64")

    commands_end = _HEADER.size + sizeofcmds
    if commands_end > len(data):
        raise Truncated(
            "load commands extend past the end of the input", _HEADER.size,
        )

    load_commands = []
    segments = []
    symtab = None   # type: t.Optional[SymtabCommand]
    cursor = _HEADER.size

    for idx in range(ncmds):
        if cursor + _LOAD_COMMAND.size > commands_end:
            raise MalformedLoadCommand(
                "load command #{} overruns sizeofcmds".format(idx), cursor,
            )

        cmd, cmdsize = _LOAD_COMMAND.unpack_from(data, cursor)

        if cmdsize < _LOAD_COMMAND.size or cursor + cmdsize > commands_end:
            raise MalformedLoadCommand(
                "load command #{} has invalid size {}".format(idx, cmdsize),
                cursor,
            )

        command = LoadCommand(cmd=cmd, size=cmdsize, offset=cursor)
        load_commands.append(command)

        if cmd == LC_SEGMENT_64:
            segments.append(_parse_segment(data, command))
        elif cmd == LC_SYMTAB:
            if symtab is not None:
                raise MalformedLoadCommand(
                    "duplicate LC_SYMTAB", cursor,
                )
            symtab = _parse_symtab(data, command)
        elif cmd in (LC_ENCRYPTION_INFO, LC_ENCRYPTION_INFO_64):
            if cmdsize < _ENCRYPTION.size:
                raise MalformedLoadCommand(
                    "encryption info command is too short", cursor,
                )
            crypt_id = _ENCRYPTION.unpack_from(data, cursor)[4]
            if crypt_id:
                raise Encrypted(
                    "image is encrypted (cryptid={}); decrypt it with an "
                    "external tool first, decryption is out of "
                    "scope".format(crypt_id), cursor,
                )

        cursor += cmdsize

    if cursor != commands_end:
        raise MalformedLoadCommand(
            "load command sizes sum to {}, header declares {}".format(
                cursor - _HEADER.size, sizeofcmds,
            ), _HEADER.size,
        )

    return MachOImage(
        magic=magic,
        cpu_type=cpu_type,
        cpu_subtype=cpu_subtype,
        file_type=file_type,
        load_commands=tuple(load_commands),
        segments=tuple(segments),
        sections=tuple(s for seg in segments for s in seg.sections),
        symtab=symtab,
        encryption_flag=False,
        data=data,
    )


def _parse_fat(data: bytes) -> t.Tuple[MachOImage, ...]:
    magic, nfat_arch = _unpack(_FAT_HEADER, data, 0, "fat_header")

    if nfat_arch > MAX_FAT_ARCHS:
        raise BadMagic(
            "implausible fat architecture count {}".format(nfat_arch), 4,
        )

    layout = _FAT_ARCH_64 if magic == FAT_MAGIC_64 else _FAT_ARCH
    images = []

    for idx in range(nfat_arch):
        entry = _unpack(
            layout, data, _FAT_HEADER.size + idx * layout.size,
            "fat_arch #{}".format(idx),
        )
        cpu_type, offset, size = entry[0], entry[2], entry[3]

        if offset + size > len(data):
            raise Truncated(
                "fat slice #{} extends past the input".format(idx), offset,
            )

        image_data = data[offset:offset + size]
        slice_magic, = _unpack(
            _MAGIC, image_data, 0, "fat slice #{} magic".format(idx),
        )

        if slice_magic in (MH_MAGIC, MH_CIGAM):
            log.debug(
                "Skipping 32-bit fat slice #%d (cpu type %d)", idx, cpu_type,
            )
            continue

        _check_magic(slice_magic, offset)
        images.append(_parse_thin(image_data))

    if not images:
        raise BadMagic("fat file holds no 64-bit image", 0)

    return tuple(images)


def parse_image(data: bytes) -> t.Tuple[MachOImage, ...]:
    """
    Parse a thin or fat Mach-O file.

    Only 64-bit little-endian images are understood. For thin input a
    one-element tuple is returned; for fat input every contained 64-bit
    slice is parsed (32-bit slices are skipped) and offsets inside each
    image are relative to the slice.

    Never reads out of bounds: any inconsistency raises a subclass of
    :class:`xarascan.macho.exceptions.MachOError`.

    :param data: raw file content
    :raises BadMagic: not a supported Mach-O container
    :raises Truncated: an offset or size points past the input
    :raises Encrypted: the image carries a non-zero ``cryptid``
    :raises MalformedLoadCommand: load command sizes are inconsistent
    """
    data = bytes(data)

    if len(data) < _MAGIC.size:
        raise Truncated("input is too short to hold a magic number", 0)

    magic, = _MAGIC_BE.unpack_from(data, 0)
    if magic in (FAT_MAGIC, FAT_MAGIC_64):
        return _parse_fat(data)

    return (_parse_thin(data),)


def iter_nlist(
    image: MachOImage,
) -> t.Iterator[t.Tuple[str, int, int, int]]:
    """ Yields ``(name, n_type, n_sect, n_value)`` of every symbol """

    symtab = image.symtab
    if symtab is None:
        return

    strings_end = symtab.string_offset + symtab.string_size

    for idx in range(symtab.symbol_count):
        strx, n_type, n_sect, _, n_value = _unpack(
            _NLIST, image.data, symtab.symbol_offset + idx * NLIST_SIZE,
            "nlist_64 #{}".format(idx), error=MalformedSymtab,
        )

        if strx == 0:
            yield "", n_type, n_sect, n_value
            continue

        if strx >= symtab.string_size:
            raise MalformedSymtab(
                "symbol #{} name index {} is outside the string "
                "table".format(idx, strx), symtab.symbol_offset,
            )

        start = symtab.string_offset + strx
        end = image.data.find(b"\0", start, strings_end)

        if end < 0:
            raise MalformedSymtab(
                "symbol #{} name is not NUL-terminated".format(idx), start,
            )

        name = image.data[start:end].decode("utf-8", "surrogateescape")
        yield name, n_type, n_sect, n_value


__all__ = (
    "LoadCommand",
    "MachOImage",
    "Section",
    "Segment",
    "SymtabCommand",
    "iter_nlist",
    "parse_image",
)
