from .exceptions import XaraError
from .ir import parse_listing, print_listing
from .macho import extract_imports, extract_selectors, parse_image, quick_scan
from .monitor import Alarm, AlarmKind, Monitor, load_profiles, watch_trace
from .platform import DEFAULT_PLATFORM, Platform
from .rules import builtin_rules, dump_rules, load_rules
from .simreg import apply, parse_scenario, run_scenario, vet_app
from .verdict import Finding, Report, Verdict, analyze, render_report
from .version import __version__, version_info


__all__ = (
    "Alarm",
    "AlarmKind",
    "DEFAULT_PLATFORM",
    "Finding",
    "Monitor",
    "Platform",
    "Report",
    "Verdict",
    "XaraError",
    "__version__",
    "analyze",
    "apply",
    "builtin_rules",
    "dump_rules",
    "extract_imports",
    "extract_selectors",
    "load_profiles",
    "load_rules",
    "parse_image",
    "parse_listing",
    "parse_scenario",
    "print_listing",
    "quick_scan",
    "render_report",
    "run_scenario",
    "version_info",
    "vet_app",
)
