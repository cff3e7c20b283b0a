import json
import typing as t
from collections import OrderedDict
from enum import Enum, unique

from ..dataflow import RefSite
from ..exceptions import XaraError
from ..ir import ListingError, parse_location
from ..platform import Platform
from ..rules import Channel
from .types import (
    AuthStatus, ChannelSummary, Evidence, Finding, Report, UseRef, Verdict,
)


@unique
class OutputFormat(str, Enum):
    text = "text"
    json = "json"

    @classmethod
    def choices(cls) -> t.Tuple[str, ...]:
        return tuple(cls._member_names_)    # type: ignore

    def __str__(self) -> str:
        return self.value


class ReportFormatError(XaraError):
    pass


def finding_to_dict(finding: Finding) -> t.Dict[str, t.Any]:
    claim = finding.claim
    return OrderedDict((
        ("channel", finding.channel.value),
        ("verdict", finding.verdict.value),
        ("auth_status", finding.auth_status.value),
        ("auth_available", finding.auth_available),
        ("claim", OrderedDict((
            ("proc", claim.procedure),
            ("index", claim.index),
            ("location", str(claim.location)),
            ("name", finding.claim_name),
        ))),
        ("uses", [
            OrderedDict((
                ("proc", use.procedure),
                ("index", use.index),
                ("location", use.location),
                ("name", use.name),
            ))
            for use in finding.uses
        ]),
        ("evidence", [
            OrderedDict((
                ("proc", item.procedure),
                ("index", item.index),
                ("explanation", item.explanation),
            ))
            for item in finding.evidence
        ]),
        ("notes", list(finding.notes)),
    ))


def report_to_dict(report: Report) -> t.Dict[str, t.Any]:
    return OrderedDict((
        ("source", report.source),
        ("platform", report.platform.value),
        ("ruleset_version", report.ruleset_version),
        ("findings", [finding_to_dict(f) for f in report.findings]),
        ("summary", OrderedDict(
            (channel.value, OrderedDict(counts._asdict()))
            for channel, counts in report.summary.items()
        )),
    ))


def _render_text(report: Report) -> str:
    lines = [
        "source: {}".format(report.source),
        "platform: {}".format(report.platform),
        "ruleset: {}".format(report.ruleset_version or "-"),
    ]

    for finding in report.findings:
        claim = finding.claim
        lines.append("")
        lines.append("[{}] {} in {}".format(
            finding.verdict, finding.channel, claim.procedure,
        ))
        lines.append("  claim: {} {} at {}".format(
            finding.claim_name, claim.location, claim.index,
        ))
        for use in finding.uses:
            lines.append("  use: {} {} at {}:{}".format(
                use.name, use.location, use.procedure, use.index,
            ))
        lines.append("  auth: {}".format(finding.auth_status))
        if finding.evidence:
            lines.append("  evidence:")
            lines.extend(
                "    {}:{} {}".format(item.procedure, item.index,
                                      item.explanation)
                for item in finding.evidence
            )
        lines.extend("  note: {}".format(note) for note in finding.notes)

    lines.append("")
    lines.append("summary:")
    for channel, counts in report.summary.items():
        lines.append("  {}: {}".format(channel, " ".join(
            "{}={}".format(name, value)
            for name, value in counts._asdict().items()
        )))
    return "\n".join(lines) + "\n"


def render_report(
    report: Report, output_format: t.Union[OutputFormat, str] = "text",
) -> str:
    """
    Render ``report`` deterministically: findings keep their order, JSON
    keys keep insertion order.
    """
    if OutputFormat(output_format) is OutputFormat.json:
        return json.dumps(
            report_to_dict(report), indent=2, ensure_ascii=False,
        ) + "\n"
    return _render_text(report)


def _finding_from_dict(
    data: t.Mapping[str, t.Any], platform: Platform,
) -> Finding:
    claim = data["claim"]
    return Finding(
        channel=Channel(data["channel"]),
        claim=RefSite(
            claim["proc"], int(claim["index"]),
            parse_location(claim["location"]),
        ),
        claim_name=claim["name"],
        uses=tuple(
            UseRef(u["proc"], int(u["index"]), u["location"], u["name"])
            for u in data["uses"]
        ),
        auth_status=AuthStatus(data["auth_status"]),
        verdict=Verdict(data["verdict"]),
        platform=platform,
        evidence=tuple(
            Evidence(e["proc"], int(e["index"]), e["explanation"])
            for e in data["evidence"]
        ),
        notes=tuple(data["notes"]),
        auth_available=bool(data["auth_available"]),
    )


def load_report(text: str) -> Report:
    """ Parse the JSON form of a report back into a :class:`Report` """
    try:
        data = json.loads(text)
        platform = Platform(data["platform"])
        report = Report(
            source=data["source"],
            platform=platform,
            findings=tuple(
                _finding_from_dict(item, platform)
                for item in data["findings"]
            ),
            ruleset_version=data["ruleset_version"],
            channels=tuple(Channel(key) for key in data["summary"]),
        )
        summary = {
            Channel(key): ChannelSummary(**value)
            for key, value in data["summary"].items()
        }
    except (ValueError, KeyError, TypeError, ListingError) as e:
        raise ReportFormatError("Malformed report: {}".format(e)) from e

    if summary != report.summary:
        raise ReportFormatError("Report summary does not match its findings")
    return report


class ChannelTally(t.NamedTuple):
    files: int = 0
    vulnerable_files: int = 0


class CorpusSummary(t.NamedTuple):
    files: int
    channels: t.Dict[Channel, ChannelTally]
    files_using_channels: int
    vulnerable_files: int

    @property
    def vulnerable_share(self) -> float:
        if not self.files_using_channels:
            return 0.0
        return self.vulnerable_files / self.files_using_channels


def summarize_reports(reports: t.Iterable[Report]) -> CorpusSummary:
    """
    Tally a batch of reports: per channel, how many files have findings
    and how many have a vulnerable one.
    """
    reports = list(reports)
    channels = OrderedDict(
        (channel, ChannelTally()) for channel in Channel
    )   # type: t.Dict[Channel, ChannelTally]
    using = vulnerable = 0

    for report in reports:
        present = {finding.channel for finding in report.findings}
        flawed = {
            finding.channel for finding in report.findings
            if finding.verdict is Verdict.vulnerable
        }
        for channel in present:
            tally = channels.setdefault(channel, ChannelTally())
            channels[channel] = ChannelTally(
                tally.files + 1,
                tally.vulnerable_files + (channel in flawed),
            )
        using += bool(present)
        vulnerable += bool(flawed)

    return CorpusSummary(len(reports), channels, using, vulnerable)


def render_summary(summary: CorpusSummary) -> str:
    lines = ["corpus: {} file(s)".format(summary.files)]
    for channel, tally in summary.channels.items():
        lines.append("  {}: {} file(s), {} vulnerable".format(
            channel, tally.files, tally.vulnerable_files,
        ))
    lines.append("vulnerable: {}/{} ({:.1%})".format(
        summary.vulnerable_files, summary.files_using_channels,
        summary.vulnerable_share,
    ))
    return "\n".join(lines) + "\n"


__all__ = (
    "ChannelTally",
    "CorpusSummary",
    "OutputFormat",
    "ReportFormatError",
    "finding_to_dict",
    "load_report",
    "render_report",
    "render_summary",
    "report_to_dict",
    "summarize_reports",
)
