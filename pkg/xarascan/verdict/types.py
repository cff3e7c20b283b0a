import typing as t
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum, unique

from ..dataflow import RefSite
from ..platform import Platform
from ..rules import Channel


@unique
class AuthStatus(str, Enum):
    missing = "Missing"
    present_all_paths = "PresentAllPaths"
    present_some_paths = "PresentSomePaths"
    not_applicable = "NotApplicable"

    def __str__(self) -> str:
        return self.value


@unique
class Verdict(str, Enum):
    vulnerable = "Vulnerable"
    safe = "Safe"
    informational = "Informational"
    not_applicable = "NotApplicable"

    def __str__(self) -> str:
        return self.value


class UseRef(t.NamedTuple):
    procedure: str
    index: int      # the consuming call
    location: str
    name: str


class Evidence(t.NamedTuple):
    procedure: str
    index: int
    explanation: str


@dataclass(frozen=True)
class Finding:
    channel: Channel
    claim: RefSite
    claim_name: str
    uses: t.Tuple[UseRef, ...]
    auth_status: AuthStatus
    verdict: Verdict
    platform: Platform
    evidence: t.Tuple[Evidence, ...] = ()
    notes: t.Tuple[str, ...] = ()
    # whether the platform offers any API to authenticate the counterpart
    auth_available: bool = True

    @property
    def sort_key(self) -> t.Tuple[str, int, int]:
        return (
            self.claim.procedure, self.claim.index,
            list(Channel).index(self.channel),
        )

    def violations(self) -> t.List[str]:
        """ Broken consistency rules between verdict and auth status """
        problems = []
        if (
            self.verdict is Verdict.safe and
            self.auth_status is not AuthStatus.present_all_paths
        ):
            problems.append("Safe finding without all-paths authentication")
        if self.verdict is Verdict.vulnerable:
            unauthenticated = self.auth_status in (
                AuthStatus.missing, AuthStatus.present_some_paths,
            )
            impossible = not self.auth_available and bool(self.uses)
            if not (unauthenticated or impossible):
                problems.append(
                    "Vulnerable finding with auth status {}".format(
                        self.auth_status,
                    ),
                )
        return problems


class ChannelSummary(t.NamedTuple):
    vulnerable: int = 0
    safe: int = 0
    informational: int = 0
    not_applicable: int = 0


_SUMMARY_FIELDS = {
    Verdict.vulnerable: "vulnerable",
    Verdict.safe: "safe",
    Verdict.informational: "informational",
    Verdict.not_applicable: "not_applicable",
}


@dataclass(frozen=True)
class Report:
    source: str
    platform: Platform
    findings: t.Tuple[Finding, ...] = ()
    ruleset_version: str = ""
    channels: t.Tuple[Channel, ...] = field(
        default_factory=lambda: tuple(Channel),
    )

    @property
    def summary(self) -> t.Dict[Channel, ChannelSummary]:
        counts = Counter(
            (finding.channel, finding.verdict) for finding in self.findings
        )
        channels = list(self.channels)
        channels.extend(
            finding.channel for finding in self.findings
            if finding.channel not in channels
        )
        return {
            channel: ChannelSummary(**{
                name: counts[(channel, verdict)]
                for verdict, name in _SUMMARY_FIELDS.items()
            })
            for channel in channels
        }

    @property
    def vulnerable(self) -> bool:
        return any(f.verdict is Verdict.vulnerable for f in self.findings)

    def of_channel(self, channel: t.Union[Channel, str]) -> t.List[Finding]:
        channel = Channel(channel)
        return [f for f in self.findings if f.channel is channel]


__all__ = (
    "AuthStatus",
    "ChannelSummary",
    "Evidence",
    "Finding",
    "Report",
    "UseRef",
    "Verdict",
)
