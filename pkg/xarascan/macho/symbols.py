import typing as t

from .constants import N_EXT, N_SECT, N_STAB, N_TYPE, N_UNDF
from .image import MachOImage, iter_nlist


class SymbolTable(t.NamedTuple):
    imported: t.FrozenSet[str] = frozenset()
    defined: t.FrozenSet[str] = frozenset()


def _c_name(name: str) -> str:
    # flat C naming: the compiler prepends exactly one underscore
    return name[1:] if name.startswith("_") else name


def extract_imports(image: MachOImage) -> SymbolTable:
    """
    Names of undefined external symbols (the C APIs an image calls) and
    of symbols defined in its sections, leading underscore stripped.

    :raises MalformedSymtab: name index out of range or unterminated name
    """

    imported = set()
    defined = set()

    for name, n_type, _, _ in iter_nlist(image):
        if not name or n_type & N_STAB:
            continue

        kind = n_type & N_TYPE
        if kind == N_UNDF and n_type & N_EXT:
            imported.add(_c_name(name))
        elif kind == N_SECT:
            defined.add(_c_name(name))

    return SymbolTable(
        imported=frozenset(imported),
        defined=frozenset(defined),
    )


__all__ = ("SymbolTable", "extract_imports")
