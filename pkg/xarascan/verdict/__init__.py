from .engine import analyze
from .render import (
    CorpusSummary, OutputFormat, ReportFormatError, load_report,
    render_report, render_summary, summarize_reports,
)
from .types import (
    AuthStatus, ChannelSummary, Evidence, Finding, Report, UseRef, Verdict,
)


__all__ = (
    "AuthStatus",
    "ChannelSummary",
    "CorpusSummary",
    "Evidence",
    "Finding",
    "OutputFormat",
    "Report",
    "ReportFormatError",
    "UseRef",
    "Verdict",
    "analyze",
    "load_report",
    "render_report",
    "render_summary",
    "summarize_reports",
)
