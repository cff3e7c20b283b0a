import logging

from .types import (
    RESERVED_BID_PREFIX, AppManifest, Outcome, SysState, is_valid_bid,
)


log = logging.getLogger(__name__)


def vet_app(state: SysState, manifest: AppManifest) -> Outcome:
    """
    Store review of a submitted app.

    Only the main BID is checked for uniqueness. Sub-target BIDs of helpers
    and XPC services may collide with anything, and declared schemes are
    not compared with other apps at all. BIDs under the Apple prefix are
    refused for every team but the system one.
    """
    for bid in manifest.bids:
        if not is_valid_bid(bid):
            return Outcome.denied("malformed-bid")

    if not manifest.is_system:
        for bid in manifest.bids:
            if bid.startswith(RESERVED_BID_PREFIX):
                log.debug(
                    "Refusing %r: %r uses the reserved prefix",
                    manifest.app_id, bid,
                )
                return Outcome.denied("reserved-prefix")

    if state.manifest(manifest.app_id) is not None:
        return Outcome.denied("duplicate-app")

    for accepted in state.store:
        if accepted.bid == manifest.bid:
            return Outcome.denied("duplicate-bid")

    return Outcome.ok()


__all__ = ("vet_app",)
