# Values from <mach-o/loader.h>, <mach-o/fat.h> and <mach-o/nlist.h>.
# Only what the 64-bit little-endian reader and the fixture builder need.

MH_MAGIC = 0xfeedface
MH_CIGAM = 0xcefaedfe
MH_MAGIC_64 = 0xfeedfacf
MH_CIGAM_64 = 0xcffaedfe

FAT_MAGIC = 0xcafebabe
FAT_MAGIC_64 = 0xcafebabf

MH_EXECUTE = 0x2

CPU_ARCH_ABI64 = 0x01000000
CPU_TYPE_X86 = 7
CPU_TYPE_ARM = 12
CPU_TYPE_X86_64 = CPU_TYPE_X86 | CPU_ARCH_ABI64
CPU_TYPE_ARM64 = CPU_TYPE_ARM | CPU_ARCH_ABI64

LC_SYMTAB = 0x2
LC_SEGMENT_64 = 0x19
LC_ENCRYPTION_INFO = 0x21
LC_ENCRYPTION_INFO_64 = 0x2c

SECTION_TYPE = 0x000000ff
S_REGULAR = 0x0
S_ZEROFILL = 0x1
S_CSTRING_LITERALS = 0x2
S_LITERAL_POINTERS = 0x5
S_GB_ZEROFILL = 0xc
S_THREAD_LOCAL_ZEROFILL = 0x12

ZEROFILL_TYPES = frozenset((
    S_ZEROFILL, S_GB_ZEROFILL, S_THREAD_LOCAL_ZEROFILL,
))

N_STAB = 0xe0
N_TYPE = 0x0e
N_EXT = 0x01
N_UNDF = 0x0
N_SECT = 0xe

# struct layouts, little-endian unless noted
MACH_HEADER_64 = "<IiiIIIII"
LOAD_COMMAND = "<II"
SEGMENT_COMMAND_64 = "<II16sQQQQiiII"
SECTION_64 = "<16s16sQQIIIIIIII"
SYMTAB_COMMAND = "<IIIIII"
ENCRYPTION_INFO_COMMAND = "<IIIII"
NLIST_64 = "<IBBHQ"
FAT_HEADER = ">II"
FAT_ARCH = ">iiIII"
FAT_ARCH_64 = ">iiQQII"

SECT_OBJC_METHNAME = "__objc_methname"
SECT_OBJC_SELREFS = "__objc_selrefs"
SECT_OBJC_MSGREFS = "__objc_msgrefs"

# Fat files are also a Java class file magic; no real universal binary
# carries more slices than this.
MAX_FAT_ARCHS = 64
