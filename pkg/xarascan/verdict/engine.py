"""
Detection of unauthenticated channel use.

For every procedure and channel rule the engine locates claim sites, binds
the channel reference, follows it to its uses and checks whether an
authentication call lies on every path in between.
"""
import logging
import re
import typing as t

from ..cfg import (
    CallGraph, Cfg, argument_indices, argument_literals, build_callgraph,
    build_cfg, call_name, reachable_instructions, resolve_selector,
)
from ..dataflow import (
    MAX_CALL_DEPTH, AnalysisError, DefUseChain, DerivePolicy, Facts,
    InterproceduralChain, RefSite, Tag, UseSite, auth_on_all_paths,
    auth_on_some_path, compute_interprocedural, tags_at,
)
from ..exceptions import XaraError
from ..ir import OBJC_MSGSEND, RV, ArgAddr, Call, Listing, LoadStr, Location
from ..platform import DEFAULT_PLATFORM, Platform
from ..rules import (
    ApiKind, ApiSig, AuthMode, Binding, BindingKind, Carrier, ChannelRule,
    RuleSet, Severity,
)
from ..rules.builtin import placeholder_names
from .types import (
    AuthStatus, Evidence, Finding, Report, UseRef, Verdict,
)


log = logging.getLogger(__name__)

_SCHEME = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*\Z")

AuthSites = t.Dict[ApiSig, t.FrozenSet[int]]


class ClaimSite(t.NamedTuple):
    index: int
    location: Location
    sig: ApiSig
    name: str
    # URL scheme of a literal claim
    scheme: t.Optional[str] = None


def literal_scheme(literal: str, separator: str) -> t.Optional[str]:
    scheme, sep, _ = literal.partition(separator)
    if not sep or not _SCHEME.match(scheme):
        return None
    return scheme.lower()


def sig_matches(sig: ApiSig, cfg: Cfg, index: int) -> bool:
    instruction = cfg.procedure[index]
    if not isinstance(instruction, Call):
        return False
    if sig.kind is ApiKind.any:
        return True
    if sig.kind is ApiKind.c:
        return instruction.symbol == sig.name != OBJC_MSGSEND
    if sig.kind is ApiKind.objc:
        return resolve_selector(cfg, index) == sig.name
    return False


def bound_argument(
    cfg: Cfg, index: int, binding: Binding,
) -> t.Optional[t.Tuple[int, Location]]:
    """
    Instruction index and location of the argument ``binding`` designates
    at the call ``index``.
    """
    arguments = argument_indices(cfg, index)
    kind = binding.kind

    if kind is BindingKind.recv:
        slot = 0
    elif kind in (BindingKind.arg, BindingKind.out):
        if binding.index is not None:
            slot = binding.index
        elif arguments:
            slot = max(arguments)
        else:
            return None
    else:
        return None

    position = arguments.get(slot)
    if position is None:
        return None
    instruction = cfg.procedure[position]
    if isinstance(instruction, ArgAddr):
        return position, instruction.slot
    if kind is BindingKind.out:
        return None
    return position, instruction.src     # type: ignore


def bound_location(
    cfg: Cfg, index: int, binding: Binding,
) -> t.Optional[Location]:
    if binding.kind is BindingKind.ret:
        return RV
    bound = bound_argument(cfg, index, binding)
    return None if bound is None else bound[1]


def find_claims(
    cfg: Cfg, rule: ChannelRule, reachable: t.AbstractSet[int],
) -> t.List[ClaimSite]:
    claims = []     # type: t.List[ClaimSite]
    literal_sigs = [s for s in rule.claims if s.kind is ApiKind.literal]
    call_sigs = [s for s in rule.claims if s.kind is not ApiKind.literal]

    for index in sorted(reachable):
        instruction = cfg.procedure[index]

        if isinstance(instruction, LoadStr):
            for sig in literal_sigs:
                scheme = literal_scheme(instruction.literal, sig.name)
                if scheme is not None:
                    claims.append(ClaimSite(
                        index, instruction.dst, sig, instruction.literal,
                        scheme,
                    ))
                    break
            continue

        for sig in call_sigs:
            if not sig_matches(sig, cfg, index):
                continue
            location = bound_location(cfg, index, sig.ref)
            if location is None:
                log.warning(
                    "Cannot bind the %s reference of %r at %s:%d",
                    sig.ref, sig.name, cfg.name, index,
                )
                continue
            claims.append(ClaimSite(index, location, sig, sig.name))
            break

    return claims


def derive_policy(rule: ChannelRule) -> t.Optional[DerivePolicy]:
    """ Locations a derivation call fills from a carrier argument """
    if not rule.derives:
        return None

    def policy(cfg: Cfg, index: int, facts: Facts) -> t.Iterator[Location]:
        for sig in rule.derives:
            if not sig_matches(sig, cfg, index):
                continue
            bound = bound_argument(cfg, index, sig.ref)
            if bound is None or not tags_at(facts, bound[1]):
                continue
            output = bound_location(cfg, index, sig.out)  # type: ignore
            if output is not None:
                yield output

    return policy


def _carrier_accepts(carrier: Carrier, tags: t.AbstractSet[Tag]) -> bool:
    if carrier is Carrier.ref:
        return Tag.ref in tags
    if carrier is Carrier.derived:
        return Tag.derived in tags
    return bool(tags)


def _authenticates(
    cfg: Cfg, chain: DefUseChain, index: int, sig: ApiSig,
) -> bool:
    if not sig_matches(sig, cfg, index):
        return False
    if sig.literal is not None:
        if sig.literal not in argument_literals(cfg, index).values():
            return False
    if sig.ref.kind is BindingKind.none:
        return True

    if sig.ref.kind is BindingKind.any:
        candidates = []     # type: t.List[t.Tuple[int, Location]]
        for position in argument_indices(cfg, index).values():
            bound = cfg.procedure[position]
            candidates.append((
                position,
                bound.slot if isinstance(bound, ArgAddr)
                else bound.src,     # type: ignore
            ))
    else:
        bound_arg = bound_argument(cfg, index, sig.ref)
        candidates = [] if bound_arg is None else [bound_arg]

    return any(
        _carrier_accepts(sig.carrier, tags_at(chain.carriers[pos], loc))
        for pos, loc in candidates
    )


def find_auth_sites(
    cfg: Cfg, chain: DefUseChain, rule: ChannelRule,
    reachable: t.AbstractSet[int],
) -> AuthSites:
    return {
        sig: frozenset(
            index for index in reachable
            if _authenticates(cfg, chain, index, sig)
        )
        for sig in rule.auths
    }


def _slot_matches(cfg: Cfg, use: UseSite, binding: Binding) -> bool:
    kind = binding.kind
    is_addr = isinstance(cfg.procedure[use.index], ArgAddr)
    if kind is BindingKind.any:
        return True
    if kind is BindingKind.recv:
        return use.arg_slot == 0 and not is_addr
    if kind is BindingKind.arg:
        return use.arg_slot == binding.index
    if kind is BindingKind.out:
        if not is_addr:
            return False
        if binding.index is None:
            return use.arg_slot == max(argument_indices(cfg, use.call_index))
        return use.arg_slot == binding.index
    return False


def use_name(
    cfg: Cfg, use: UseSite, rule: ChannelRule, callgraph: CallGraph,
) -> t.Optional[str]:
    """ Name of the use API the chain reaches at ``use``, if any """
    for sig in rule.uses:
        if not sig_matches(sig, cfg, use.call_index):
            continue
        if not _slot_matches(cfg, use, sig.ref):
            continue
        if sig.kind is not ApiKind.any:
            return sig.name

        # the wildcard leaves out calls the rule already gives a role and
        # calls into the listing, whose bodies are analysed instead
        if callgraph.callee(cfg.name, use.call_index) is not None:
            continue
        others = rule.claims + rule.auths + rule.derives
        if any(sig_matches(o, cfg, use.call_index) for o in others):
            continue
        call = cfg.procedure[use.call_index]
        return call_name(cfg, use.call_index) or call.symbol  # type: ignore
    return None


class _ChainView(t.NamedTuple):
    link: t.Optional[int]
    chain: DefUseChain
    cfg: Cfg
    auth_sites: AuthSites

    @property
    def all_auth_sites(self) -> t.FrozenSet[int]:
        return frozenset().union(*self.auth_sites.values())


class _ClaimAnalysis:
    __slots__ = (
        "cfgs", "callgraph", "rule", "platform", "procedure", "claim",
        "inter", "views", "uses",
    )

    def __init__(
        self, cfgs: t.Mapping[str, Cfg], callgraph: CallGraph,
        rule: ChannelRule, platform: Platform, procedure: str,
        claim: ClaimSite, max_depth: int,
    ):
        self.cfgs = cfgs
        self.callgraph = callgraph
        self.rule = rule
        self.platform = platform
        self.procedure = procedure
        self.claim = claim

        definition = RefSite(procedure, claim.index, claim.location)
        self.inter = compute_interprocedural(
            cfgs, callgraph, definition, derive_policy(rule), max_depth,
        )   # type: InterproceduralChain

        self.views = []     # type: t.List[_ChainView]
        self.uses = []      # type: t.List[t.Tuple[_ChainView, UseSite, str]]
        for link, chain in self.inter.chains():
            cfg = cfgs[chain.definition.procedure]
            reachable = reachable_instructions(cfg)
            view = _ChainView(
                link, chain, cfg,
                find_auth_sites(cfg, chain, rule, reachable),
            )
            self.views.append(view)
            for use in chain.uses:
                name = use_name(cfg, use, rule, callgraph)
                if name is not None:
                    self.uses.append((view, use, name))

    def _hops(
        self, view: _ChainView, use: UseSite,
    ) -> t.List[t.Tuple[_ChainView, int]]:
        """ Chain and target call of every procedure from claim to use """
        path = self.inter.path_to(view.link)
        views = [self.views[0]] + [
            self.views[self.inter.links.index(link) + 1] for link in path
        ]
        targets = [link.call_site.call_index for link in path]
        targets.append(use.call_index)
        return list(zip(views, targets))

    def _covered(
        self, view: _ChainView, use: UseSite,
        sites: t.Callable[[_ChainView], t.AbstractSet[int]],
    ) -> bool:
        return any(
            auth_on_all_paths(hop.cfg, hop.chain.definition, target, sites(hop))
            for hop, target in self._hops(view, use)
        )

    def _use_covered(self, view: _ChainView, use: UseSite) -> bool:
        if self.rule.auth_mode is AuthMode.all:
            return bool(self.rule.auths) and all(
                self._covered(
                    view, use,
                    lambda hop, sig=sig: hop.auth_sites[sig],  # type: ignore
                )
                for sig in self.rule.auths
            )
        return self._covered(view, use, lambda hop: hop.all_auth_sites)

    def auth_status(self) -> AuthStatus:
        if all(self._use_covered(view, use) for view, use, _ in self.uses):
            return AuthStatus.present_all_paths
        for view, use, _ in self.uses:
            for hop, target in self._hops(view, use):
                if auth_on_some_path(
                    hop.cfg, hop.chain.definition, target, hop.all_auth_sites,
                ):
                    return AuthStatus.present_some_paths
        return AuthStatus.missing

    def evidence(self) -> t.Tuple[Evidence, ...]:
        claim = self.claim
        entries = [Evidence(
            self.procedure, claim.index,
            "claim {} binds {} to {}".format(
                claim.name, claim.sig.ref, claim.location,
            ),
        )]

        for view in self.views:
            proc = view.cfg.name
            chain_entries = []
            if view.link is not None:
                link = self.inter.links[view.link]
                entries.append(Evidence(
                    link.caller, link.call_site.call_index,
                    "reference passed as argument {} to {}".format(
                        link.call_site.arg_slot, proc,
                    ),
                ))
            for index in view.chain.kills:
                chain_entries.append(Evidence(
                    proc, index, "reference overwritten",
                ))
            for sig, indices in view.auth_sites.items():
                chain_entries.extend(
                    Evidence(proc, index, "auth {}".format(sig.name))
                    for index in indices
                )
            chain_entries.extend(
                Evidence(
                    proc, use.call_index,
                    "use {} via {}".format(name, use.via),
                )
                for use_view, use, name in self.uses if use_view is view
            )
            entries.extend(sorted(set(chain_entries)))
        return tuple(entries)

    def use_refs(self) -> t.Tuple[UseRef, ...]:
        refs = sorted(
            {
                UseRef(view.cfg.name, use.call_index, str(use.via), name)
                for view, use, name in self.uses
            },
        )
        return tuple(refs)


def _finding(
    analysis: _ClaimAnalysis, verdict: Verdict, status: AuthStatus,
    notes: t.List[str],
) -> Finding:
    rule = analysis.rule
    return Finding(
        channel=rule.channel,
        claim=analysis.inter.root.definition,
        claim_name=analysis.claim.name,
        uses=analysis.use_refs(),
        auth_status=status,
        verdict=verdict,
        platform=analysis.platform,
        evidence=analysis.evidence(),
        notes=tuple(notes),
        auth_available=rule.auth_available(analysis.platform),
    )


def evaluate_claim(analysis: _ClaimAnalysis) -> t.Optional[Finding]:
    rule, platform, claim = analysis.rule, analysis.platform, analysis.claim
    notes = []  # type: t.List[str]
    if analysis.inter.truncated:
        notes.append("inter-procedural chain truncated")

    if not rule.covers(platform):
        if not analysis.uses and rule.claim_severity is None:
            return None
        notes.append("channel {} does not exist on {}".format(
            rule.channel, platform,
        ))
        return _finding(
            analysis, Verdict.not_applicable, AuthStatus.not_applicable, notes,
        )

    if rule.claim_severity is not None:
        notes.append("claiming the channel exposes it")
        return _finding(
            analysis, Verdict.informational, AuthStatus.not_applicable, notes,
        )

    if not analysis.uses:
        return None

    if claim.scheme is not None and claim.scheme in rule.reserved:
        notes.append("reserved scheme {}".format(claim.scheme))
        return _finding(
            analysis, Verdict.not_applicable, AuthStatus.not_applicable, notes,
        )

    if not rule.auth_available(platform):
        notes.append("no authentication API on {}".format(platform))
        verdict = (
            Verdict.vulnerable
            if rule.no_auth_severity is Severity.vulnerable
            else Verdict.informational
        )
        return _finding(analysis, verdict, AuthStatus.not_applicable, notes)

    status = analysis.auth_status()
    verdict = (
        Verdict.safe if status is AuthStatus.present_all_paths
        else Verdict.vulnerable
    )
    return _finding(analysis, verdict, status, notes)


def analyze(
    listing: Listing, rules: RuleSet,
    platform: Platform = DEFAULT_PLATFORM,
    max_depth: int = MAX_CALL_DEPTH,
) -> Report:
    """
    Run claim discovery, define-use chains and authentication checks over
    every procedure of ``listing``.

    One :class:`Finding` is reported per claim site and channel; findings
    are ordered by procedure name, claim index and channel.
    """
    placeholder_names(rules)
    cfgs = {proc.name: build_cfg(proc) for proc in listing}
    callgraph = build_callgraph(listing, cfgs)
    findings = []   # type: t.List[Finding]

    for proc in listing:
        cfg = cfgs[proc.name]
        reachable = reachable_instructions(cfg)
        for rule in rules:
            for claim in find_claims(cfg, rule, reachable):
                try:
                    finding = evaluate_claim(_ClaimAnalysis(
                        cfgs, callgraph, rule, platform, proc.name, claim,
                        max_depth,
                    ))
                except AnalysisError as e:
                    if e.procedure is None:
                        e.procedure = proc.name
                    raise
                except XaraError as e:
                    raise AnalysisError(
                        "{} claim at {}: {}".format(
                            rule.channel, claim.index, e,
                        ),
                        procedure=proc.name,
                    ) from e

                if finding is not None:
                    log.debug(
                        "%s %s finding for claim %s:%d",
                        finding.verdict, finding.channel, proc.name,
                        claim.index,
                    )
                    findings.append(finding)

    findings.sort(key=lambda f: f.sort_key)
    return Report(
        source=listing.source_name,
        platform=platform,
        findings=tuple(findings),
        ruleset_version=rules.version,
        channels=rules.channels,
    )


__all__ = (
    "ClaimSite",
    "analyze",
    "bound_argument",
    "derive_policy",
    "evaluate_claim",
    "find_auth_sites",
    "find_claims",
    "literal_scheme",
    "sig_matches",
    "use_name",
)
