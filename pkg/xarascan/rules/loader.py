"""
Reader and writer of the rule file format::

    # xara-rules: 1
    version "my-rules-3"

    channel keychain
        claim c "SecKeychainFindGenericPassword" ref=out:last
        use c "SecKeychainItemModifyContent" ref=arg:0
        derive c "SecKeychainItemCopyAccess" ref=arg:0 out=out:last
        auth c "SecACLCopyContents" ref=arg:0 carrier=derived
        platform osx auth=yes

Top-level lines start in the first column, channel keys are indented.
"""
import logging
import shlex
import typing as t

from ..platform import Platform
from .exceptions import RulesError, SchemaError
from .types import (
    ApiKind, ApiSig, AuthMode, Binding, Carrier, Channel, ChannelRule, Role,
    RuleSet, Severity,
)


log = logging.getLogger(__name__)

RULES_HEADER = "# xara-rules: 1"
_HEADER_PREFIX = "# xara-rules:"

# long spellings accepted for the api kind, written back in the short form
API_KIND_ALIASES = {"c-symbol": ApiKind.c, "objc-selector": ApiKind.objc}


class _ChannelDraft:
    __slots__ = (
        "channel", "line", "sigs", "platforms", "auth_mode",
        "no_auth_severity", "claim_severity", "reserved",
    )

    def __init__(self, channel: Channel, line: int):
        self.channel = channel
        self.line = line
        self.sigs = {
            role: [] for role in Role
        }   # type: t.Dict[Role, t.List[ApiSig]]
        self.platforms = []     # type: t.List[t.Tuple[Platform, bool]]
        self.auth_mode = AuthMode.any
        self.no_auth_severity = Severity.vulnerable
        self.claim_severity = None  # type: t.Optional[Severity]
        self.reserved = []      # type: t.List[str]

    def finish(self) -> ChannelRule:
        return ChannelRule(
            channel=self.channel,
            claims=tuple(self.sigs[Role.claim]),
            uses=tuple(self.sigs[Role.use]),
            auths=tuple(self.sigs[Role.auth]),
            derives=tuple(self.sigs[Role.derive]),
            platforms=tuple(self.platforms),
            auth_mode=self.auth_mode,
            no_auth_severity=self.no_auth_severity,
            claim_severity=self.claim_severity,
            reserved=tuple(self.reserved),
        )


def _enum_value(enum: t.Any, value: str, what: str) -> t.Any:
    try:
        return enum(value)
    except ValueError:
        choices = ", ".join(member.value for member in enum)
        raise SchemaError(
            "unknown {} {!r}, expected one of: {}".format(what, value, choices),
        ) from None


def _options(tokens: t.Sequence[str]) -> t.Dict[str, str]:
    options = {}    # type: t.Dict[str, str]
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise SchemaError("expected key=value, got {!r}".format(token))
        if key in options:
            raise SchemaError("option {!r} given twice".format(key))
        options[key] = value
    return options


def _parse_sig(role: Role, tokens: t.Sequence[str]) -> ApiSig:
    if len(tokens) < 2:
        raise SchemaError(
            "{} needs a kind and a quoted name".format(role.value),
        )

    kind = API_KIND_ALIASES.get(tokens[0])
    if kind is None:
        kind = _enum_value(ApiKind, tokens[0], "api kind")
    name = tokens[1]
    options = _options(tokens[2:])

    unknown = set(options) - {"ref", "out", "carrier", "literal"}
    if unknown:
        raise SchemaError(
            "unknown option(s): {}".format(", ".join(sorted(unknown))),
        )
    if "ref" not in options:
        raise SchemaError("{} {!r} needs ref=".format(role.value, name))

    out = options.get("out")
    sig = ApiSig(
        kind=kind,
        name=name,
        ref=Binding.parse(options["ref"]),
        out=Binding.parse(out) if out is not None else None,
        carrier=_enum_value(
            Carrier, options.get("carrier", Carrier.any.value), "carrier",
        ),
        literal=options.get("literal"),
    )
    sig.validate(role)
    return sig


def _parse_channel_key(draft: _ChannelDraft, tokens: t.List[str]) -> None:
    key, args = tokens[0], tokens[1:]

    if key in Role.__members__:
        draft.sigs[Role(key)].append(_parse_sig(Role(key), args))
        return

    if key == "platform":
        if len(args) != 2 or args[1] not in ("auth=yes", "auth=no"):
            raise SchemaError("expected: platform <osx|ios> auth=<yes|no>")
        platform = _enum_value(Platform, args[0], "platform")
        draft.platforms.append((platform, args[1] == "auth=yes"))
        return

    if len(args) != 1:
        raise SchemaError("{} takes exactly one value".format(key))
    value = args[0]

    if key == "reserved":
        draft.reserved.append(value)
    elif key == "auth-mode":
        draft.auth_mode = _enum_value(AuthMode, value, "auth mode")
    elif key == "on-no-auth":
        draft.no_auth_severity = _enum_value(Severity, value, "severity")
    elif key == "on-claim":
        if value != Severity.informational.value:
            raise SchemaError("on-claim only accepts 'informational'")
        draft.claim_severity = Severity.informational
    else:
        raise SchemaError("unknown key {!r}".format(key))


def load_rules(text: str, path: t.Optional[str] = None) -> RuleSet:
    """
    Parse and validate a rule file.

    Every error raised is a :class:`RulesError` carrying ``path`` and the
    1-based ``line`` it refers to. Input without any content yields an
    empty :class:`RuleSet`.
    """
    version = ""
    version_seen = False
    header_seen = False
    drafts = []         # type: t.List[_ChannelDraft]
    current = None      # type: t.Optional[_ChannelDraft]

    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()

        try:
            if stripped.startswith(_HEADER_PREFIX):
                if stripped != RULES_HEADER:
                    raise SchemaError(
                        "unsupported rules header {!r}".format(stripped),
                    )
                header_seen = True
                continue

            try:
                tokens = shlex.split(raw, comments=True)
            except ValueError as e:
                raise SchemaError(str(e)) from None

            if not tokens:
                continue

            if not header_seen:
                raise SchemaError(
                    "missing {!r} header line".format(RULES_HEADER),
                )

            if not raw[0].isspace():
                current = None
                if tokens[0] == "channel" and len(tokens) == 2:
                    current = _ChannelDraft(
                        _enum_value(Channel, tokens[1], "channel"), lineno,
                    )
                    drafts.append(current)
                elif tokens[0] == "version" and len(tokens) == 2:
                    if version_seen:
                        raise SchemaError("version given twice")
                    version, version_seen = tokens[1], True
                else:
                    raise SchemaError(
                        "unknown top-level line {!r}".format(stripped),
                    )
                continue

            if current is None:
                raise SchemaError("indented line outside of a channel")
            _parse_channel_key(current, tokens)
        except RulesError as e:
            e.path, e.line = path, lineno
            raise

    rules = []      # type: t.List[ChannelRule]
    for draft in drafts:
        try:
            rule = draft.finish()
            rule.validate()
            rules.append(rule)
            # RuleSet construction reports duplicates
            RuleSet(tuple(rules))
        except RulesError as e:
            e.path, e.line = path, draft.line
            raise

    log.debug("Loaded %d channel rule(s) from %s", len(rules), path or "text")
    return RuleSet(tuple(rules), version=version)


def dump_rules(rules: RuleSet) -> str:
    """ Canonical text of ``rules``, accepted back by :func:`load_rules` """
    lines = [RULES_HEADER]
    if rules.version:
        lines.append('version "{}"'.format(
            rules.version.replace("\\", "\\\\").replace('"', '\\"'),
        ))
    for rule in rules:
        lines.append("")
        lines.append(rule.render())
    return "\n".join(lines) + "\n"


__all__ = ("RULES_HEADER", "dump_rules", "load_rules")
