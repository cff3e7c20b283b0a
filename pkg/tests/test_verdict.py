import json
from collections import defaultdict

import pytest

from xarascan.dataflow import RefSite
from xarascan.ir import Stack, parse_listing
from xarascan.platform import Platform
from xarascan.rules import Channel, load_rules
from xarascan.verdict import (
    AuthStatus, OutputFormat, Report, ReportFormatError, UseRef, Verdict,
    analyze, load_report, render_report, render_summary, summarize_reports,
)

from . import CORPUS, RULES


def read_labels():
    labels = defaultdict(set)
    for line in (CORPUS / "labels.tsv").read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        name, platform, channel, verdict = line.split("\t")
        key = (name, platform)
        labels[key]
        if channel != "-":
            labels[key].add((channel, verdict))
    return sorted(labels.items())


LABELS = read_labels()


@pytest.mark.parametrize(
    "key, expected", LABELS,
    ids=["{}-{}".format(*key) for key, _ in LABELS],
)
def test_corpus(key, expected, rules, load_listing):
    name, platform = key
    report = analyze(load_listing(name), rules, Platform(platform))

    assert report.source == name
    assert report.platform is Platform(platform)
    assert {
        (f.channel.value, f.verdict.value) for f in report.findings
    } == expected

    for finding in report.findings:
        assert finding.violations() == []


def test_every_corpus_file_is_labelled():
    labelled = {name for (name, _), _ in LABELS}
    assert labelled == {path.name for path in CORPUS.glob("*.naif")}


def test_unauthenticated_keychain_item(rules, load_listing):
    report = analyze(
        load_listing("evernote_keychain.naif"), rules, Platform.osx,
    )
    finding, = report.findings
    proc = "-[ENKeychainHelper saveValue:toKeyChainItem:]"

    assert finding.channel is Channel.keychain
    assert finding.claim == RefSite(proc, 7, Stack(-48))
    assert finding.claim_name == "SecKeychainFindGenericPassword"
    assert finding.uses == (
        UseRef(proc, 12, "sp[-48]", "SecKeychainItemModifyAttributesAndData"),
    )
    assert finding.auth_status is AuthStatus.missing
    assert finding.verdict is Verdict.vulnerable
    assert finding.auth_available
    assert finding.evidence[0].index == 7
    assert report.vulnerable
    assert report.summary[Channel.keychain].vulnerable == 1
    assert report.of_channel("keychain") == [finding]


def test_keychain_is_not_applicable_on_ios(rules, load_listing):
    report = analyze(
        load_listing("evernote_keychain.naif"), rules, Platform.ios,
    )
    finding, = report.findings
    assert finding.verdict is Verdict.not_applicable
    assert finding.auth_status is AuthStatus.not_applicable
    assert not report.vulnerable
    assert any("does not exist" in note for note in finding.notes)


def test_reserved_scheme(rules, load_listing):
    report = analyze(load_listing("scheme_reserved.naif"), rules)
    for finding in report.findings:
        assert finding.verdict is Verdict.not_applicable
        assert any(note.startswith("reserved scheme") for note in
                   finding.notes)


def test_interprocedural_evidence(rules, load_listing):
    report = analyze(
        load_listing("keychain_interprocedural.naif"), rules, Platform.osx,
    )
    finding, = report.findings
    assert any(
        "reference passed as argument" in item.explanation
        for item in finding.evidence
    )
    assert {use.procedure for use in finding.uses} - {finding.claim.procedure}


def test_max_depth(rules, load_listing):
    listing = load_listing("keychain_interprocedural.naif")
    report = analyze(listing, rules, Platform.osx, max_depth=0)
    assert not any(
        f.verdict is Verdict.vulnerable for f in report.findings
    )


POCKETSOCKET = """\
# naif-version: 1
.proc "-[VaultServer server:webSocketDidOpen:]"
    0: sel r1, "server:webSocketDidOpen:"
    1: arg 0, r0
    2: arg 1, r1
    3: call "objc_msgSend"
    4: mov r6, rv
    5: sel r2, "send:"
    6: arg 0, r0
    7: arg 1, r2
    8: arg 2, r6
    9: call "objc_msgSend"
   10: ret
.endproc
"""


def test_custom_rules():
    path = RULES / "pocketsocket.rules"
    rules = load_rules(path.read_text(), path=str(path))
    report = analyze(parse_listing(POCKETSOCKET, "vault.naif"), rules)

    assert report.ruleset_version == "pocketsocket-1"
    assert report.channels == (Channel.websocket_server,)
    finding, = report.findings
    assert finding.verdict is Verdict.vulnerable
    assert finding.uses[0].name == "send:"
    assert list(report.summary) == [Channel.websocket_server]


def test_report_round_trip(rules, load_listing):
    for name in ("evernote_keychain.naif", "mixed_channels.naif"):
        report = analyze(load_listing(name), rules, Platform.osx)
        text = render_report(report, OutputFormat.json)
        assert load_report(text) == report
        assert render_report(load_report(text), "json") == text


def test_render(rules, load_listing):
    report = analyze(load_listing("evernote_keychain.naif"), rules)
    assert render_report(report) == render_report(report)

    text = render_report(report, "text")
    assert text.startswith("source: evernote_keychain.naif\n")
    assert "[Vulnerable] keychain in" in text
    assert "  auth: Missing" in text

    data = json.loads(render_report(report, "json"))
    assert list(data) == [
        "source", "platform", "ruleset_version", "findings", "summary",
    ]
    finding, = data["findings"]
    assert finding["claim"] == {
        "proc": "-[ENKeychainHelper saveValue:toKeyChainItem:]",
        "index": 7,
        "location": "sp[-48]",
        "name": "SecKeychainFindGenericPassword",
    }
    assert data["summary"]["keychain"]["vulnerable"] == 1


@pytest.mark.parametrize("text", [
    "",
    "[]",
    '{"source": "x"}',
    json.dumps({
        "source": "x", "platform": "osx", "ruleset_version": "",
        "findings": [], "summary": {"keychain": {"vulnerable": 1}},
    }),
    json.dumps({
        "source": "x", "platform": "windows", "ruleset_version": "",
        "findings": [], "summary": {},
    }),
])
def test_bad_report(text):
    with pytest.raises(ReportFormatError):
        load_report(text)


def test_summarize(rules, load_listing):
    names = (
        "evernote_keychain.naif", "keychain_safe.naif",
        "scheme_unused.naif", "mixed_channels.naif",
    )
    reports = [
        analyze(load_listing(name), rules, Platform.osx) for name in names
    ]
    summary = summarize_reports(reports)

    assert summary.files == 4
    assert summary.files_using_channels == 3
    assert summary.vulnerable_files == 2
    assert summary.vulnerable_share == pytest.approx(2 / 3)
    assert summary.channels[Channel.keychain] == (2, 1)
    assert summary.channels[Channel.scheme] == (1, 1)
    assert summary.channels[Channel.bid] == (1, 0)

    text = render_summary(summary)
    assert text.startswith("corpus: 4 file(s)\n")
    assert "vulnerable: 2/3 (66.7%)" in text


def test_summarize_nothing():
    summary = summarize_reports([Report("empty.naif", Platform.osx)])
    assert summary.files == 1
    assert summary.vulnerable_share == 0.0
