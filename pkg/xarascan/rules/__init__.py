from .builtin import RESERVED_SCHEMES, builtin_rules
from .exceptions import BadBinding, DuplicateChannel, RulesError, SchemaError
from .loader import dump_rules, load_rules
from .types import (
    ApiKind, ApiSig, AuthMode, Binding, BindingKind, Carrier, Channel,
    ChannelRule, Role, RuleSet, Severity,
)


__all__ = (
    "ApiKind",
    "ApiSig",
    "AuthMode",
    "BadBinding",
    "Binding",
    "BindingKind",
    "Carrier",
    "Channel",
    "ChannelRule",
    "DuplicateChannel",
    "RESERVED_SCHEMES",
    "Role",
    "RuleSet",
    "RulesError",
    "SchemaError",
    "Severity",
    "builtin_rules",
    "dump_rules",
    "load_rules",
)
