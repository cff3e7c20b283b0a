import argparse
import asyncio
import json
import logging
import os
import re
import sys
import typing as t
from collections import OrderedDict

from aiomisc import entrypoint, threaded
from aiomisc.log import LogFormat, LogLevel

from .cfg import build_cfg, cfg_to_dot
from .dataflow import MAX_CALL_DEPTH
from .exceptions import XaraError
from .ir import Listing, parse_listing
from .macho import parse_image, quick_scan
from .monitor import Monitor, alarm_to_dict, load_profiles, render_alarms
from .platform import DEFAULT_PLATFORM, Platform
from .rules import RuleSet, builtin_rules, dump_rules, load_rules
from .simreg import parse_scenario, render_trace, run_scenario, trace_to_dict
from .verdict import (
    OutputFormat, Report, analyze, render_report, render_summary,
    summarize_reports,
)
from .verdict.render import report_to_dict
from .version import __version__


log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FOUND = 2
EXIT_ALARM = 3


class FileResult(t.NamedTuple):
    path: str
    value: t.Any = None
    error: t.Optional[BaseException] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def error_record(error: BaseException) -> t.Dict[str, str]:
    return OrderedDict((
        ("type", type(error).__name__),
        ("message", str(error)),
    ))


@threaded
def process_file(
    func: t.Callable[..., t.Any], path: str, *args: t.Any,
) -> FileResult:
    try:
        return FileResult(path, func(path, *args))
    except (XaraError, OSError) as e:
        log.warning("Skipping %s: %s", path, e)
        return FileResult(path, error=e)


async def process_files(
    func: t.Callable[..., t.Any], paths: t.Iterable[str], *args: t.Any,
) -> t.List[FileResult]:
    """
    Run ``func(path, *args)`` for every path in the thread pool. Results
    keep the order of ``paths``; a failing file does not stop the others.
    """
    return list(await asyncio.gather(
        *[process_file(func, path, *args) for path in paths]
    ))


def read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fp:
        return fp.read()


def read_rules(path: t.Optional[str]) -> RuleSet:
    if path is None:
        return builtin_rules()
    return load_rules(read_text(path), path=path)


def emit(arguments: argparse.Namespace, text: str) -> None:
    out = getattr(arguments, "out", None)
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return

    with open(out, "w", encoding="utf-8") as fp:
        fp.write(text)


def scan_path(path: str, rules: RuleSet) -> t.List[t.Dict[str, t.Any]]:
    with open(path, "rb") as fp:
        data = fp.read()

    return [
        OrderedDict((
            ("cpu_type", image.cpu_type),
            ("channels", quick_scan(image, rules).as_dict()),
        ))
        for image in parse_image(data)
    ]


def _quickscan_text(results: t.Sequence[FileResult]) -> str:
    lines = []
    for result in results:
        if result.failed:
            lines.append("{}: error: {}: {}".format(
                result.path, type(result.error).__name__, result.error,
            ))
            continue
        lines.append("{}:".format(result.path))
        for number, image in enumerate(result.value):
            present = [
                "{} ({})".format(channel, ", ".join(usage["matched"]))
                for channel, usage in image["channels"].items()
                if usage["present"]
            ]
            lines.append("  image {} cpu 0x{:x}: {}".format(
                number, image["cpu_type"], "; ".join(present) or "none",
            ))
    return "\n".join(lines) + "\n"


async def cmd_quickscan(arguments: argparse.Namespace) -> int:
    rules = read_rules(arguments.rules)
    results = await process_files(scan_path, arguments.paths, rules)

    if OutputFormat(arguments.format) is OutputFormat.json:
        emit(arguments, json.dumps({"files": [
            OrderedDict((
                ("path", r.path),
                ("error", error_record(r.error)),  # type: ignore
            )) if r.failed else OrderedDict((
                ("path", r.path), ("images", r.value),
            ))
            for r in results
        ]}, indent=2, ensure_ascii=False) + "\n")
    else:
        emit(arguments, _quickscan_text(results))

    if any(r.failed for r in results):
        return EXIT_ERROR
    present = any(
        usage["present"]
        for r in results for image in r.value
        for usage in image["channels"].values()
    )
    return EXIT_FOUND if present else EXIT_OK


_UNSAFE_NAME = re.compile(r"[^A-Za-z0-9_.-]+")


def dump_cfgs(listing: Listing, source: str, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    stem = os.path.splitext(os.path.basename(source))[0]
    for proc in listing:
        name = _UNSAFE_NAME.sub("_", proc.name).strip("_") or "proc"
        path = os.path.join(directory, "{}.{}.dot".format(stem, name))
        with open(path, "w", encoding="utf-8") as fp:
            fp.write(cfg_to_dot(build_cfg(proc)))


def analyze_path(
    path: str, rules: RuleSet, platform: Platform, max_depth: int,
    dump_dir: t.Optional[str] = None,
) -> Report:
    listing = parse_listing(read_text(path), source_name=path)
    if dump_dir is not None:
        dump_cfgs(listing, path, dump_dir)
    return analyze(listing, rules, platform=platform, max_depth=max_depth)


async def cmd_analyze(arguments: argparse.Namespace) -> int:
    rules = read_rules(arguments.rules)
    results = await process_files(
        analyze_path, arguments.paths, rules, Platform(arguments.platform),
        arguments.max_depth, arguments.dump_cfg,
    )
    reports = [r.value for r in results if not r.failed]
    summary = summarize_reports(reports)

    if OutputFormat(arguments.format) is OutputFormat.json:
        emit(arguments, json.dumps(OrderedDict((
            ("reports", [report_to_dict(report) for report in reports]),
            ("errors", [
                OrderedDict((("path", r.path),) + tuple(
                    error_record(r.error).items(),   # type: ignore
                ))
                for r in results if r.failed
            ]),
            ("summary", OrderedDict((
                ("files", summary.files),
                ("files_using_channels", summary.files_using_channels),
                ("vulnerable_files", summary.vulnerable_files),
                ("channels", OrderedDict(
                    (channel.value, OrderedDict(tally._asdict()))
                    for channel, tally in summary.channels.items()
                )),
            ))),
        )), indent=2, ensure_ascii=False) + "\n")
    else:
        parts = []
        for r in results:
            if r.failed:
                parts.append("{}: error: {}: {}\n".format(
                    r.path, type(r.error).__name__, r.error,
                ))
            else:
                parts.append(render_report(r.value, OutputFormat.text))
        if len(results) > 1:
            parts.append(render_summary(summary))
        emit(arguments, "\n".join(parts))

    if any(r.failed for r in results):
        return EXIT_ERROR
    if any(report.vulnerable for report in reports):
        return EXIT_FOUND
    return EXIT_OK


async def cmd_rules_check(arguments: argparse.Namespace) -> int:
    try:
        rules = load_rules(read_text(arguments.path), path=arguments.path)
        rules.validate()
    except (XaraError, OSError) as e:
        sys.stderr.write("{}\n".format(e))
        return EXIT_ERROR

    emit(arguments, "{}: ok, {} channel(s)\n".format(
        arguments.path, len(rules),
    ))
    return EXIT_OK


async def cmd_rules_dump(arguments: argparse.Namespace) -> int:
    try:
        rules = read_rules(arguments.rules)
    except (XaraError, OSError) as e:
        sys.stderr.write("{}\n".format(e))
        return EXIT_ERROR
    emit(arguments, dump_rules(rules))
    return EXIT_OK


async def log_alarm(alarm: t.Any) -> None:
    log.info("Alarm: %s", alarm)


async def cmd_sim(arguments: argparse.Namespace) -> int:
    try:
        scenario = parse_scenario(
            read_text(arguments.path), source=arguments.path,
        )
        platform = Platform(
            arguments.platform or scenario.platform or DEFAULT_PLATFORM,
        )
        trace = run_scenario(scenario.events, platform)
        profiles = {}   # type: t.Dict[str, t.Any]
        if arguments.profiles:
            profiles = load_profiles(read_text(arguments.profiles))
    except (XaraError, OSError) as e:
        sys.stderr.write("{}\n".format(e))
        return EXIT_ERROR

    alarms = []     # type: t.List[t.Any]
    if arguments.monitor:
        monitor = Monitor(profiles)
        monitor.on_alarm.connect(log_alarm)
        monitor.on_alarm.freeze()
        alarms = await monitor.watch(trace)

    if OutputFormat(arguments.format) is OutputFormat.json:
        payload = OrderedDict((("trace", trace_to_dict(trace)),))
        if arguments.monitor:
            payload["alarms"] = [alarm_to_dict(alarm) for alarm in alarms]
        emit(arguments, json.dumps(
            payload, indent=2, ensure_ascii=False,
        ) + "\n")
    else:
        text = render_trace(trace, OutputFormat.text)
        if arguments.monitor:
            text += render_alarms(alarms, OutputFormat.text)
        emit(arguments, text)

    return EXIT_ALARM if alarms else EXIT_OK


def _add_output(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--format", default=OutputFormat.text.value,
        choices=OutputFormat.choices(), help="Output format",
    )
    parser.add_argument(
        "--out", default=None, help="Write the result to this file",
    )


parser = argparse.ArgumentParser(
    prog="xarascan",
    description="Find and reproduce unauthorized cross-app resource access",
)
parser.add_argument(
    "--version", action="version", version="%(prog)s " + __version__,
)
parser.add_argument(
    "--log-level", default=LogLevel.warning.name,
    choices=LogLevel.choices(),
)
parser.add_argument(
    "--log-format", default=LogFormat.color.name,
    choices=LogFormat.choices(),
)
parser.add_argument(
    "--pool-size", default=None, type=int, help="Thread pool size",
)

commands = parser.add_subparsers(dest="command", metavar="COMMAND")
commands.required = True

quickscan_parser = commands.add_parser(
    "quickscan", help="List the channels Mach-O files touch",
)
quickscan_parser.add_argument("paths", nargs="+")
quickscan_parser.add_argument("--rules", default=None)
_add_output(quickscan_parser)
quickscan_parser.set_defaults(handler=cmd_quickscan)

analyze_parser = commands.add_parser(
    "analyze", help="Check NAIF listings for unauthenticated channels",
)
analyze_parser.add_argument("paths", nargs="+")
analyze_parser.add_argument("--rules", default=None)
analyze_parser.add_argument(
    "--platform", default=DEFAULT_PLATFORM.value, choices=Platform.choices(),
)
analyze_parser.add_argument(
    "--max-depth", default=MAX_CALL_DEPTH, type=int,
    help="How many local calls a reference is followed through",
)
analyze_parser.add_argument(
    "--dump-cfg", default=None, metavar="DIR",
    help="Write a Graphviz file per procedure into DIR",
)
_add_output(analyze_parser)
analyze_parser.set_defaults(handler=cmd_analyze)

rules_parser = commands.add_parser("rules", help="Rule file tools")
rules_commands = rules_parser.add_subparsers(
    dest="rules_command", metavar="COMMAND",
)
rules_commands.required = True

rules_check_parser = rules_commands.add_parser(
    "check", help="Validate a rule file",
)
rules_check_parser.add_argument("path")
rules_check_parser.set_defaults(handler=cmd_rules_check)

rules_dump_parser = rules_commands.add_parser(
    "dump", help="Print a rule set in canonical form",
)
rules_dump_parser.add_argument(
    "--rules", default=None, help="Rule file, the builtin rules by default",
)
rules_dump_parser.add_argument("--out", default=None)
rules_dump_parser.set_defaults(handler=cmd_rules_dump)

sim_parser = commands.add_parser("sim", help="Registry simulator")
sim_commands = sim_parser.add_subparsers(dest="sim_command", metavar="COMMAND")
sim_commands.required = True

sim_run_parser = sim_commands.add_parser("run", help="Run a scenario file")
sim_run_parser.add_argument("path")
sim_run_parser.add_argument(
    "--platform", default=None, choices=Platform.choices(),
    help="Overrides the platform header of the scenario",
)
sim_run_parser.add_argument(
    "--monitor", action="store_true", help="Watch the run for alarms",
)
sim_run_parser.add_argument(
    "--profiles", default=None, help="Keychain ACL profiles",
)
_add_output(sim_run_parser)
sim_run_parser.set_defaults(handler=cmd_sim)


def main(argv: t.Optional[t.Sequence[str]] = None) -> int:
    arguments = parser.parse_args(argv)

    with entrypoint(
        log_level=arguments.log_level,
        log_format=arguments.log_format,
        pool_size=arguments.pool_size,
    ) as loop:
        try:
            return loop.run_until_complete(arguments.handler(arguments))
        except (XaraError, OSError) as e:
            log.error("%s", e)
            sys.stderr.write("{}\n".format(e))
            return EXIT_ERROR


__all__ = (
    "EXIT_ALARM",
    "EXIT_ERROR",
    "EXIT_FOUND",
    "EXIT_OK",
    "FileResult",
    "main",
    "parser",
    "process_files",
)
