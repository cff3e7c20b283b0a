import typing as t
from dataclasses import dataclass, field
from enum import Enum, unique

from ..platform import Platform
from .exceptions import BadBinding, DuplicateChannel, SchemaError


MAX_ARG_INDEX = 15
WILDCARD = "*"


@unique
class Channel(str, Enum):
    keychain = "keychain"
    nsconnection_client = "nsconnection-client"
    nsconnection_server = "nsconnection-server"
    websocket_server = "websocket-server"
    scheme = "scheme"
    bid = "bid"

    def __str__(self) -> str:
        return self.value


@unique
class ApiKind(str, Enum):
    c = "c"
    objc = "objc"
    # string literal holding an URL, scheme claims only
    literal = "literal"
    # every call, name must be the wildcard
    any = "any"


@unique
class Role(str, Enum):
    claim = "claim"
    use = "use"
    auth = "auth"
    derive = "derive"


@unique
class BindingKind(str, Enum):
    ret = "ret"
    recv = "recv"
    arg = "arg"
    out = "out"
    any = "any"
    value = "value"
    none = "none"


@unique
class Carrier(str, Enum):
    ref = "ref"
    derived = "derived"
    any = "any"


@unique
class AuthMode(str, Enum):
    any = "any"
    all = "all"


@unique
class Severity(str, Enum):
    vulnerable = "vulnerable"
    informational = "informational"


class Binding(t.NamedTuple):
    """
    Where a call keeps the channel reference.

    ``out`` with ``index=None`` means the last argument written at the call
    site, which must be an ``argaddr``.
    """

    kind: BindingKind
    index: t.Optional[int] = None

    @classmethod
    def parse(cls, text: str) -> "Binding":
        name, _, index = text.partition(":")

        try:
            kind = BindingKind(name)
        except ValueError:
            raise BadBinding("unknown binding {!r}".format(text)) from None

        if kind in (BindingKind.arg, BindingKind.out):
            if kind is BindingKind.out and index == "last":
                return cls(kind)
            if not index.isdigit():
                raise BadBinding(
                    "binding {!r} needs a numeric argument index".format(text),
                )
            value = int(index)
            if value > MAX_ARG_INDEX:
                raise BadBinding(
                    "argument index {} is out of range 0..{}".format(
                        value, MAX_ARG_INDEX,
                    ),
                )
            return cls(kind, value)

        if index:
            raise BadBinding("binding {!r} takes no index".format(text))
        return cls(kind)

    def __str__(self) -> str:
        if self.kind is BindingKind.out and self.index is None:
            return "out:last"
        if self.index is None:
            return self.kind.value
        return "{}:{}".format(self.kind.value, self.index)


RET = Binding(BindingKind.ret)
RECV = Binding(BindingKind.recv)
ANY = Binding(BindingKind.any)
VALUE = Binding(BindingKind.value)
NONE = Binding(BindingKind.none)
OUT_LAST = Binding(BindingKind.out)


def arg(index: int) -> Binding:
    return Binding(BindingKind.arg, index)


def _quote(value: str) -> str:
    return '"{}"'.format(value.replace("\\", "\\\\").replace('"', '\\"'))


@dataclass(frozen=True)
class ApiSig:
    kind: ApiKind
    name: str
    ref: Binding
    # derive only: where the derived carrier is written
    out: t.Optional[Binding] = None
    # auth only: which carrier the bound argument must hold
    carrier: Carrier = Carrier.any
    # auth only: an argument of the call must hold this string literal
    literal: t.Optional[str] = None

    def validate(self, role: Role) -> None:
        if not self.name:
            raise SchemaError("{} name is empty".format(role.value))

        if self.kind is ApiKind.any:
            if self.name != WILDCARD or role is not Role.use:
                raise SchemaError(
                    "kind 'any' is only valid for uses named \"*\"",
                )
        elif self.name == WILDCARD:
            raise SchemaError("wildcard name needs kind 'any'")

        if self.kind is ApiKind.literal and role is not Role.claim:
            raise SchemaError("literal signatures can only be claims")

        binding = self.ref.kind
        if (binding is BindingKind.value) != (self.kind is ApiKind.literal):
            raise BadBinding(
                "binding 'value' goes with kind 'literal' and only with it",
            )
        if binding is BindingKind.recv and self.kind is not ApiKind.objc:
            raise BadBinding(
                "receiver binding on {} signature {!r}".format(
                    self.kind.value, self.name,
                ),
            )
        if binding is BindingKind.none and role is not Role.auth:
            raise BadBinding("binding 'none' is only valid for auths")
        if binding is BindingKind.any and role not in (Role.use, Role.auth):
            raise BadBinding("binding 'any' is only valid for uses and auths")

        if role is Role.derive:
            if self.out is None:
                raise SchemaError(
                    "derive {!r} needs an out= binding".format(self.name),
                )
            if self.out.kind not in (
                BindingKind.ret, BindingKind.out, BindingKind.arg,
            ):
                raise BadBinding(
                    "derive output must be ret, out or arg, "
                    "not {}".format(self.out),
                )
        elif self.out is not None:
            raise SchemaError("out= is only valid for derive")

        if role is not Role.auth and (
            self.carrier is not Carrier.any or self.literal is not None
        ):
            raise SchemaError("carrier= and literal= are only valid for auth")

    def render(self, role: Role) -> str:
        parts = [
            role.value, self.kind.value, _quote(self.name),
            "ref={}".format(self.ref),
        ]
        if self.out is not None:
            parts.append("out={}".format(self.out))
        if self.carrier is not Carrier.any:
            parts.append("carrier={}".format(self.carrier.value))
        if self.literal is not None:
            parts.append("literal={}".format(_quote(self.literal)))
        return " ".join(parts)


def c_sig(name: str, ref: Binding, **kwargs: t.Any) -> ApiSig:
    return ApiSig(ApiKind.c, name, ref, **kwargs)


def objc_sig(name: str, ref: Binding, **kwargs: t.Any) -> ApiSig:
    return ApiSig(ApiKind.objc, name, ref, **kwargs)


@dataclass(frozen=True)
class ChannelRule:
    channel: Channel
    claims: t.Tuple[ApiSig, ...] = ()
    uses: t.Tuple[ApiSig, ...] = ()
    auths: t.Tuple[ApiSig, ...] = ()
    derives: t.Tuple[ApiSig, ...] = ()
    # platform -> whether an authentication API exists there, a platform
    # missing here does not expose the channel at all
    platforms: t.Tuple[t.Tuple[Platform, bool], ...] = ()
    auth_mode: AuthMode = AuthMode.any
    no_auth_severity: Severity = Severity.vulnerable
    claim_severity: t.Optional[Severity] = None
    reserved: t.Tuple[str, ...] = ()

    def covers(self, platform: Platform) -> bool:
        return any(p is platform for p, _ in self.platforms)

    def auth_available(self, platform: Platform) -> bool:
        for p, available in self.platforms:
            if p is platform:
                return available
        return False

    def signatures(self) -> t.Iterator[t.Tuple[Role, ApiSig]]:
        for role, sigs in (
            (Role.claim, self.claims), (Role.use, self.uses),
            (Role.auth, self.auths), (Role.derive, self.derives),
        ):
            for sig in sigs:
                yield role, sig

    def validate(self) -> None:
        for role, sig in self.signatures():
            sig.validate(role)

        if not self.claims and self.channel is not Channel.bid:
            raise SchemaError(
                "channel {} declares no claim".format(self.channel),
            )

        seen = set()    # type: t.Set[Platform]
        for platform, _ in self.platforms:
            if platform in seen:
                raise SchemaError(
                    "platform {} declared twice for {}".format(
                        platform, self.channel,
                    ),
                )
            seen.add(platform)

        if any(not name for name in self.reserved):
            raise SchemaError("reserved scheme name is empty")

    def render(self) -> str:
        lines = ["channel {}".format(self.channel)]
        lines.extend(
            "    " + sig.render(role) for role, sig in self.signatures()
        )
        for platform, available in self.platforms:
            lines.append("    platform {} auth={}".format(
                platform, "yes" if available else "no",
            ))
        if self.auth_mode is not AuthMode.any:
            lines.append("    auth-mode {}".format(self.auth_mode.value))
        if self.no_auth_severity is not Severity.vulnerable:
            lines.append(
                "    on-no-auth {}".format(self.no_auth_severity.value),
            )
        if self.claim_severity is not None:
            lines.append("    on-claim {}".format(self.claim_severity.value))
        lines.extend("    reserved {}".format(_quote(s)) for s in self.reserved)
        return "\n".join(lines)


@dataclass(frozen=True)
class RuleSet:
    rules: t.Tuple[ChannelRule, ...] = ()
    version: str = ""
    _index: t.Dict[Channel, ChannelRule] = field(
        init=False, repr=False, compare=False, hash=False,
    )

    def __post_init__(self) -> None:
        index = {}  # type: t.Dict[Channel, ChannelRule]
        for rule in self.rules:
            if rule.channel in index:
                raise DuplicateChannel(
                    "channel {} is defined twice".format(rule.channel),
                )
            index[rule.channel] = rule
        object.__setattr__(self, "_index", index)

    def __getitem__(self, channel: t.Union[Channel, str]) -> ChannelRule:
        return self._index[Channel(channel)]

    def __contains__(self, channel: object) -> bool:
        try:
            return Channel(channel) in self._index  # type: ignore
        except ValueError:
            return False

    def __iter__(self) -> t.Iterator[ChannelRule]:
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    @property
    def channels(self) -> t.Tuple[Channel, ...]:
        return tuple(rule.channel for rule in self.rules)

    def validate(self) -> None:
        for rule in self.rules:
            rule.validate()


__all__ = (
    "ANY",
    "ApiKind",
    "ApiSig",
    "AuthMode",
    "Binding",
    "BindingKind",
    "Carrier",
    "Channel",
    "ChannelRule",
    "MAX_ARG_INDEX",
    "NONE",
    "OUT_LAST",
    "RECV",
    "RET",
    "Role",
    "RuleSet",
    "Severity",
    "VALUE",
    "WILDCARD",
    "arg",
    "c_sig",
    "objc_sig",
)
