import json

import pytest

from xarascan.cli import (
    EXIT_ALARM, EXIT_ERROR, EXIT_FOUND, EXIT_OK, analyze_path, main,
    process_files,
)
from xarascan.macho.builder import MachOBuilder
from xarascan.platform import Platform
from xarascan.rules import builtin_rules, load_rules

from . import CORPUS, PROFILES, RULES, SCENARIOS


def run(capsys, *argv):
    code = main(["--log-format", "stream", *argv])
    out, _ = capsys.readouterr()
    return code, out


def corpus(*names):
    return [str(CORPUS / name) for name in names]


@pytest.mark.parametrize("names, platform, code", [
    (("evernote_keychain.naif",), "osx", EXIT_FOUND),
    (("evernote_keychain.naif",), "ios", EXIT_OK),
    (("keychain_safe.naif", "scheme_unused.naif"), "osx", EXIT_OK),
    (("keychain_safe.naif", "scheme_vulnerable.naif"), "ios", EXIT_FOUND),
])
def test_analyze_exit_code(capsys, names, platform, code):
    assert run(
        capsys, "analyze", "--platform", platform, *corpus(*names),
    )[0] == code


def test_analyze_text(capsys):
    code, out = run(
        capsys, "analyze",
        *corpus("evernote_keychain.naif", "keychain_safe.naif"),
    )
    assert code == EXIT_FOUND
    assert "[Vulnerable] keychain in" in out
    assert "[Safe] keychain in" in out
    assert "corpus: 2 file(s)" in out


def test_analyze_json(capsys):
    argv = (
        "analyze", "--format", "json",
        *corpus("evernote_keychain.naif", "mixed_channels.naif"),
    )
    code, out = run(capsys, *argv)
    assert code == EXIT_FOUND
    assert run(capsys, *argv) == (code, out)

    data = json.loads(out)
    assert list(data) == ["reports", "errors", "summary"]
    assert data["errors"] == []
    first, second = data["reports"]
    assert first["source"].endswith("evernote_keychain.naif")
    assert first["findings"][0]["verdict"] == "Vulnerable"
    assert {f["channel"] for f in second["findings"]} == {"scheme", "bid"}
    assert data["summary"]["files"] == 2
    assert data["summary"]["vulnerable_files"] == 2
    assert data["summary"]["channels"]["keychain"] == {
        "files": 1, "vulnerable_files": 1,
    }


def test_analyze_errors(capsys, tmp_path):
    broken = tmp_path / "broken.naif"
    broken.write_text('# naif-version: 1\n.proc "f"\n0: jmp 9\n.endproc\n')

    code, out = run(
        capsys, "analyze", "--format", "json", str(broken),
        str(tmp_path / "missing.naif"), *corpus("keychain_safe.naif"),
    )
    assert code == EXIT_ERROR

    data = json.loads(out)
    assert len(data["reports"]) == 1
    bad, missing = data["errors"]
    assert bad["type"] == "DanglingBranch"
    assert bad["message"].startswith(str(broken) + ":3: ")
    assert missing["type"] == "FileNotFoundError"


def test_analyze_custom_rules(capsys):
    code, out = run(
        capsys, "analyze", "--format", "json",
        "--rules", str(RULES / "pocketsocket.rules"),
        *corpus("websocket_vulnerable.naif"),
    )
    assert code == EXIT_OK
    report, = json.loads(out)["reports"]
    assert report["ruleset_version"] == "pocketsocket-1"
    assert report["findings"] == []


def test_dump_cfg(capsys, tmp_path):
    directory = tmp_path / "dot"
    run(
        capsys, "analyze", "--dump-cfg", str(directory),
        *corpus("keychain_interprocedural.naif"),
    )
    names = sorted(path.name for path in directory.iterdir())
    assert names == [
        "keychain_interprocedural.-_Sync_pushCredentials.dot",
        "keychain_interprocedural.updateItem.dot",
    ]
    assert (directory / names[1]).read_text().startswith("digraph")


def test_quickscan(capsys, tmp_path):
    keychain = tmp_path / "keychain"
    keychain.write_bytes(
        MachOBuilder().add_imports("SecKeychainFindGenericPassword").build(),
    )
    plain = tmp_path / "plain"
    plain.write_bytes(MachOBuilder().add_defined("main").build())
    junk = tmp_path / "junk"
    junk.write_bytes(b"\x00" * 64)

    code, out = run(capsys, "quickscan", str(plain))
    assert code == EXIT_OK
    assert out.endswith(": none\n")

    code, out = run(capsys, "quickscan", "--format", "json", str(keychain))
    assert code == EXIT_FOUND
    image, = json.loads(out)["files"][0]["images"]
    assert image["channels"]["keychain"] == {
        "present": True, "matched": ["SecKeychainFindGenericPassword"],
    }

    code, out = run(capsys, "quickscan", str(junk), str(plain))
    assert code == EXIT_ERROR
    assert "error: BadMagic" in out


def test_rules_commands(capsys, tmp_path):
    assert run(
        capsys, "rules", "check", str(RULES / "pocketsocket.rules"),
    ) == (EXIT_OK, "{}: ok, 1 channel(s)\n".format(
        RULES / "pocketsocket.rules",
    ))
    assert run(
        capsys, "rules", "check", str(RULES / "bad_binding.rules"),
    )[0] == EXIT_ERROR

    code, out = run(capsys, "rules", "dump")
    assert code == EXIT_OK
    assert load_rules(out) == builtin_rules()

    target = tmp_path / "rules.txt"
    assert run(capsys, "rules", "dump", "--out", str(target)) == (EXIT_OK, "")
    assert target.read_text() == out


@pytest.mark.parametrize("argv, code", [
    (("keychain_preempt.scn",), EXIT_OK),
    (("keychain_preempt.scn", "--monitor"), EXIT_OK),
    (
        (
            "keychain_preempt.scn", "--monitor",
            "--profiles", str(PROFILES / "popular.profiles"),
        ),
        EXIT_ALARM,
    ),
    (("scheme_hijack.scn", "--monitor", "--platform", "ios"), EXIT_ALARM),
    (("websocket_port.scn", "--monitor"), EXIT_OK),
    (("benign.scn", "--monitor"), EXIT_OK),
])
def test_sim_exit_code(capsys, argv, code):
    name, *rest = argv
    assert run(capsys, "sim", "run", str(SCENARIOS / name), *rest)[0] == code


def test_sim_json(capsys):
    argv = (
        "sim", "run", str(SCENARIOS / "nsconnection.scn"), "--monitor",
        "--format", "json",
    )
    code, out = run(capsys, *argv)
    assert code == EXIT_ALARM
    assert run(capsys, *argv) == (code, out)

    data = json.loads(out)
    assert list(data) == ["trace", "alarms"]
    assert data["trace"]["platform"] == "osx"
    assert len(data["trace"]["steps"]) == 7
    alarm, = data["alarms"]
    assert alarm["kind"] == "NsNameContention"
    assert alarm["event"] == 5


def test_sim_errors(capsys, tmp_path):
    broken = tmp_path / "broken.scn"
    broken.write_text("install victim\n")
    assert run(capsys, "sim", "run", str(broken))[0] == EXIT_ERROR

    bad = tmp_path / "bad.scn"
    bad.write_text("vet a team=T\n")
    assert run(capsys, "sim", "run", str(bad))[0] == EXIT_ERROR


async def test_process_files(loop):
    rules = builtin_rules()
    paths = corpus("evernote_keychain.naif", "missing.naif", "bid_home.naif")
    results = await process_files(
        analyze_path, paths, rules, Platform.osx, 3,
    )

    assert [r.path for r in results] == paths
    assert [r.failed for r in results] == [False, True, False]
    assert results[0].value.vulnerable
    assert isinstance(results[1].error, FileNotFoundError)
