import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xarascan.macho import (
    BadMagic, Encrypted, MachOError, Truncated, extract_imports,
    extract_selectors, parse_image, quick_scan,
)
from xarascan.macho.builder import (
    DANGLING_POINTER, MachOBuilder, build_fat, parse_manifest,
)
from xarascan.macho.constants import CPU_TYPE_ARM64, CPU_TYPE_X86_64
from xarascan.rules import Channel


def builder_with(
    selectors=(), message_refs=(), imports=(), defined=(), dangling=0,
    sections=(), cpu_type=CPU_TYPE_X86_64,
):
    builder = MachOBuilder(cpu_type=cpu_type)
    for segment, name, payload in sections:
        builder.add_section(segment, name, payload)
    builder.add_selectors(*selectors)
    builder.add_message_refs(*message_refs)
    builder.add_imports(*imports)
    builder.add_defined(*defined)
    for _ in range(dangling):
        builder.add_dangling_selref()
    return builder


CONFIGURATIONS = {
    "selector": dict(selectors=("openURL:",)),
    "nsconnection": dict(selectors=(
        "rootProxyForConnectionWithRegisteredName:",
        "connectionWithRegisteredName:",
    )),
    "keychain-imports": dict(imports=(
        "SecKeychainFindGenericPassword",
        "SecKeychainItemModifyContent",
    )),
    "defined-and-imported": dict(
        imports=("NSHomeDirectory",), defined=("main", "helper"),
    ),
    "msgrefs": dict(message_refs=("serviceConnectionWithName:",)),
    "selref-and-msgref": dict(
        selectors=("openURL:",), message_refs=("openURL:", "URLForApp:"),
    ),
    "dangling": dict(selectors=("send:",), dangling=2),
    "only-dangling": dict(dangling=1),
    "text-section": dict(
        sections=(("__TEXT", "__text", b"\x90" * 37),),
        selectors=("valueForHTTPHeaderField:",),
    ),
    "many-selectors": dict(
        selectors=tuple("selector{}:with:".format(i) for i in range(64)),
    ),
    "unicode": dict(selectors=("café:", "日本:")),
    "arm64": dict(
        selectors=("openURL:",),
        imports=("LSCopyDefaultHandlerForURLScheme",),
        cpu_type=CPU_TYPE_ARM64,
    ),
    "everything": dict(
        selectors=("openURL:", "openURLs:withAppBundleID:"),
        message_refs=("decidePolicyForNavigationAction:request:",),
        imports=("SecCodeCheckValidity", "SecACLCopyContents"),
        defined=("start",),
        dangling=1,
        sections=(("__DATA", "__data", b"\x01\x02\x03"),),
    ),
}


def scan(data: bytes) -> None:
    for image in parse_image(data):
        extract_selectors(image)
        extract_imports(image)


@pytest.mark.parametrize(
    "config", list(CONFIGURATIONS.values()), ids=list(CONFIGURATIONS),
)
def test_builder_roundtrip(config):
    builder = builder_with(**config)
    data = builder.build()
    manifest = builder.manifest

    images = parse_image(data)
    assert len(images) == 1
    image, = images

    assert image.cpu_type == config.get("cpu_type", CPU_TYPE_X86_64)
    assert not image.encryption_flag

    sections = {(str(s), s.file_offset) for s in image.sections}
    assert sections == {
        (entry.name, entry.address) for entry in manifest.of_kind("section")
    }

    table = extract_selectors(image)
    assert table.selectors == manifest.selectors
    assert len(table.dangling) == len(manifest.of_kind("dangling"))
    for entry in table.dangling:
        assert entry.pointer == DANGLING_POINTER

    symbols = extract_imports(image)
    assert symbols.imported == manifest.names("import")
    assert symbols.defined == manifest.names("defined")


def test_manifest_text():
    builder = builder_with(**CONFIGURATIONS["everything"])
    builder.build()
    text = builder.manifest.render()
    assert parse_manifest(text) == builder.manifest

    with pytest.raises(ValueError):
        parse_manifest("selector\tfoo:\n")
    with pytest.raises(ValueError):
        parse_manifest("nonsense\tfoo\t0x10\n")


def test_fat():
    first = builder_with(selectors=("openURL:",))
    second = builder_with(
        imports=("NSHomeDirectory",), cpu_type=CPU_TYPE_ARM64,
    )
    data = build_fat(first.build(), second.build())

    images = parse_image(data)
    assert [image.cpu_type for image in images] == [
        CPU_TYPE_X86_64, CPU_TYPE_ARM64,
    ]
    assert extract_selectors(images[0]).selectors == first.manifest.selectors
    assert extract_imports(images[1]).imported == {"NSHomeDirectory"}


def test_fat_truncated():
    data = build_fat(builder_with(selectors=("openURL:",)).build())
    with pytest.raises(Truncated):
        parse_image(data[:(1 << 12) + 16])


def test_encrypted():
    builder = builder_with(selectors=("openURL:",))
    builder.set_encryption(1)
    with pytest.raises(Encrypted):
        parse_image(builder.build())

    builder.set_encryption(0)
    image, = parse_image(builder.build())
    assert extract_selectors(image).names == {"openURL:"}


@pytest.mark.parametrize("data, error", [
    (b"", Truncated),
    (b"\xcf\xfa", Truncated),
    (b"\0" * 64, BadMagic),
    (struct.pack("<I", 0xfeedface) + b"\0" * 60, BadMagic),
    (struct.pack(">I", 0xfeedfacf) + b"\0" * 60, BadMagic),
])
def test_bad_input(data, error):
    with pytest.raises(error):
        parse_image(data)


def test_truncated_header():
    data = builder_with(selectors=("openURL:",)).build()
    with pytest.raises(Truncated):
        parse_image(data[:16])


def test_error_offset():
    with pytest.raises(MachOError) as e:
        parse_image(b"\0" * 64)
    assert e.value.offset == 0


def _mutate(data: bytes, rnd: random.Random) -> bytes:
    mutated = bytearray(data)
    choice = rnd.random()
    if choice < 0.15:
        return bytes(mutated[:rnd.randrange(len(mutated))])
    if choice < 0.3:
        # plausible but wrong little-endian words in the load commands
        offset = rnd.randrange(32, min(len(mutated), 512) - 4)
        value = rnd.choice((0, 1, 0xffffffff, 0x7fffffff, len(data)))
        struct.pack_into("<I", mutated, offset, value)
        return bytes(mutated)
    for _ in range(rnd.randint(1, 8)):
        mutated[rnd.randrange(len(mutated))] = rnd.randrange(256)
    return bytes(mutated)


def test_mutation_fuzz():
    base = builder_with(**CONFIGURATIONS["everything"]).build()
    fat = build_fat(base, builder_with(**CONFIGURATIONS["arm64"]).build())
    rnd = random.Random(1455)

    failures = 0
    for iteration in range(10000):
        data = _mutate(fat if iteration % 4 == 0 else base, rnd)
        try:
            scan(data)
        except MachOError:
            failures += 1

    assert failures > 0


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=1024))
def test_arbitrary_bytes(data):
    try:
        scan(data)
    except MachOError:
        pass


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_header_mutations(data):
    base = bytearray(builder_with(**CONFIGURATIONS["everything"]).build())
    patches = data.draw(st.lists(
        st.tuples(
            st.integers(min_value=0, max_value=len(base) - 1),
            st.integers(min_value=0, max_value=255),
        ),
        min_size=1, max_size=16,
    ))
    for offset, value in patches:
        base[offset] = value
    try:
        scan(bytes(base))
    except MachOError:
        pass


def test_quick_scan(rules):
    builder = builder_with(
        selectors=("openURL:", "rootProxyForConnectionWithRegisteredName:"),
        imports=("SecKeychainFindGenericPassword", "NSHomeDirectory"),
    )
    image, = parse_image(builder.build())
    usage = quick_scan(image, rules)

    assert set(usage.present) == {
        Channel.keychain, Channel.scheme, Channel.nsconnection_client,
        Channel.bid,
    }
    assert usage[Channel.keychain].matched_names == (
        "SecKeychainFindGenericPassword",
    )
    assert not usage["websocket-server"].present

    as_dict = usage.as_dict()
    assert as_dict["scheme"] == {"present": True, "matched": ["openURL:"]}
    assert as_dict["nsconnection-server"]["present"] is False


def test_quick_scan_empty(rules):
    image, = parse_image(builder_with(defined=("main",)).build())
    assert quick_scan(image, rules).present == ()
