"""
Channel fingerprints shipped with the analyzer.

WebSocket servers are implemented by third-party frameworks whose receiver
and response methods differ per framework, so the ``websocket-server``
channel ships placeholder selectors. Projects scanning a specific framework
override them with a rule file.
"""
import logging
import typing as t

from ..platform import Platform
from .types import (
    ANY, NONE, OUT_LAST, RECV, RET, VALUE, ApiKind, ApiSig, AuthMode,
    Carrier, Channel, ChannelRule, RuleSet, Severity, arg, c_sig, objc_sig,
)


log = logging.getLogger(__name__)

BUILTIN_VERSION = "builtin-1"

WEBSOCKET_RECEIVER_PLACEHOLDER = "websocketReceiverPlaceholder:"
WEBSOCKET_RESPONSE_PLACEHOLDER = "websocketResponsePlaceholder:"

RESERVED_SCHEMES = ("mailto", "tel", "facetime", "sms", "http", "https")
SCHEME_SEPARATOR = "://"


KEYCHAIN = ChannelRule(
    channel=Channel.keychain,
    claims=(
        c_sig("SecKeychainFindGenericPassword", OUT_LAST),
        c_sig("SecKeychainFindInternetPassword", OUT_LAST),
    ),
    uses=(
        c_sig("SecKeychainItemModifyAttributesAndData", arg(0)),
        c_sig("SecKeychainItemModifyContent", arg(0)),
    ),
    auths=(
        c_sig("SecACLCopyContents", arg(0), carrier=Carrier.derived),
    ),
    derives=(
        c_sig("SecKeychainItemCopyAccess", arg(0), out=OUT_LAST),
    ),
    platforms=((Platform.osx, True),),
)


NSCONNECTION_CLIENT = ChannelRule(
    channel=Channel.nsconnection_client,
    claims=(
        objc_sig("rootProxyForConnectionWithRegisteredName:", RET),
        objc_sig("connectionWithRegisteredName:", RET),
    ),
    uses=(ApiSig(ApiKind.any, "*", ANY),),
    platforms=((Platform.osx, False),),
)


NSCONNECTION_SERVER = ChannelRule(
    channel=Channel.nsconnection_server,
    claims=(objc_sig("serviceConnectionWithName:", RET),),
    platforms=((Platform.osx, False),),
    claim_severity=Severity.informational,
)


WEBSOCKET_SERVER = ChannelRule(
    channel=Channel.websocket_server,
    claims=(objc_sig(WEBSOCKET_RECEIVER_PLACEHOLDER, RET),),
    uses=(objc_sig(WEBSOCKET_RESPONSE_PLACEHOLDER, arg(2)),),
    auths=(
        objc_sig("valueForHTTPHeaderField:", RECV, literal="Origin"),
        c_sig("SecCodeCheckValidity", NONE),
    ),
    platforms=((Platform.osx, True),),
    auth_mode=AuthMode.all,
)


SCHEME = ChannelRule(
    channel=Channel.scheme,
    claims=(
        ApiSig(ApiKind.literal, SCHEME_SEPARATOR, VALUE),
        objc_sig("decidePolicyForMIMEType:request:", arg(3)),
        objc_sig("decidePolicyForNavigationAction:request:", arg(3)),
        objc_sig("decidePolicyForNewWindowAction:request:", arg(3)),
        objc_sig("willPerformClientRedirectToURL:", arg(2)),
    ),
    uses=(
        objc_sig("openURL:", arg(2)),
        objc_sig("openURLs:withAppBundleID:", arg(2)),
    ),
    auths=(
        objc_sig("URLForApplicationToOpenURL:", arg(2)),
        c_sig("LSCopyDefaultHandlerForURLScheme", NONE),
    ),
    platforms=((Platform.osx, True), (Platform.ios, False)),
    reserved=RESERVED_SCHEMES,
)


BID = ChannelRule(
    channel=Channel.bid,
    claims=(c_sig("NSHomeDirectory", RET),),
    platforms=((Platform.osx, False),),
    claim_severity=Severity.informational,
)


def builtin_rules() -> RuleSet:
    rules = RuleSet(
        rules=(
            KEYCHAIN, NSCONNECTION_CLIENT, NSCONNECTION_SERVER,
            WEBSOCKET_SERVER, SCHEME, BID,
        ),
        version=BUILTIN_VERSION,
    )
    rules.validate()
    return rules


def placeholder_names(rules: RuleSet) -> t.FrozenSet[str]:
    """ Placeholder selectors still present in ``rules`` """
    placeholders = {
        WEBSOCKET_RECEIVER_PLACEHOLDER, WEBSOCKET_RESPONSE_PLACEHOLDER,
    }
    found = frozenset(
        sig.name
        for rule in rules
        for _, sig in rule.signatures()
        if sig.name in placeholders
    )
    if found:
        log.debug(
            "Rule set %r uses placeholder selectors: %s",
            rules.version, ", ".join(sorted(found)),
        )
    return found


__all__ = (
    "BUILTIN_VERSION",
    "RESERVED_SCHEMES",
    "SCHEME_SEPARATOR",
    "WEBSOCKET_RECEIVER_PLACEHOLDER",
    "WEBSOCKET_RESPONSE_PLACEHOLDER",
    "builtin_rules",
    "placeholder_names",
)
