"""Cross-chain security predicates and their reference evaluator.

A bridge transfer is described by a :class:`CrossChainMessage`. The source
side additionally carries the external call it makes and its slippage
limits; the destination side carries the external call and the proof that
authorizes the release. Six composite rules (integrity, authenticity and
safety for each side) are conjunctions of named checks over those
properties and a :class:`ChainState` snapshot.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Callable, Mapping, Optional, Union

from .errors import MissingSignature, PredicateError, SideMismatch

ZERO_ADDRESS = 0
ADDRESS_BOUND = 1 << 160
SELECTOR_BOUND = 1 << 32


def _check_address(value: int, what: str) -> None:
    if not isinstance(value, int) or not 0 <= value < ADDRESS_BOUND:
        raise ValueError(f"{what} must be a 20-byte address, got {value!r}")


@dataclass(frozen=True)
class CrossChainMessage:
    source_chain: int
    sender: int
    dest_chain: int
    receiver: int
    token: int
    amount: int
    nonce: int

    def __post_init__(self):
        for name in ("sender", "receiver", "token"):
            _check_address(getattr(self, name), name)
        if self.amount < 0 or self.nonce < 0:
            raise ValueError("amount and nonce must be non-negative")

    def canonical_bytes(self) -> bytes:
        fields = (self.source_chain, self.sender, self.dest_chain, self.receiver, self.token, self.amount, self.nonce)
        return b"|".join(str(v).encode() for v in fields)


@dataclass(frozen=True)
class SlippageSpec:
    min_out: int = 0
    reference_price: Fraction = Fraction(1)
    max_deviation_bps: int = 10_000

    def __post_init__(self):
        if not 0 <= self.max_deviation_bps <= 10_000:
            raise ValueError("max_deviation_bps must lie in [0, 10000]")
        if self.reference_price <= 0:
            raise ValueError("reference_price must be positive")


@dataclass(frozen=True)
class SourceProperties:
    message: CrossChainMessage
    ext_addr: int = ZERO_ADDRESS
    ext_func: int = 0
    slippage: SlippageSpec = field(default_factory=SlippageSpec)

    side = "source"

    def __post_init__(self):
        _check_address(self.ext_addr, "ext_addr")
        if not 0 <= self.ext_func < SELECTOR_BOUND:
            raise ValueError("ext_func must be a 4-byte selector")


@dataclass(frozen=True)
class DestinationProperties:
    message: CrossChainMessage
    ext_addr: int = ZERO_ADDRESS
    ext_func: int = 0
    signature: bytes = b""

    side = "destination"

    def __post_init__(self):
        _check_address(self.ext_addr, "ext_addr")
        if not 0 <= self.ext_func < SELECTOR_BOUND:
            raise ValueError("ext_func must be a 4-byte selector")


class HmacProofVerifier:
    """Reference proof check: HMAC-SHA256 over the message's canonical bytes."""

    def __init__(self, key: bytes = b"bridgeaudit-reference-key"):
        self.key = key

    def sign(self, message: CrossChainMessage) -> bytes:
        return hmac.new(self.key, message.canonical_bytes(), hashlib.sha256).digest()

    def __call__(self, message: CrossChainMessage, signature: bytes) -> bool:
        return hmac.compare_digest(self.sign(message), signature)


DEFAULT_VERIFIER = HmacProofVerifier()


@dataclass(frozen=True)
class ChainState:
    """Everything the checks read about one chain around one execution.

    ``balances`` and ``balances_after`` are the snapshots taken before and
    after the transfer; absent keys read as 0. Absent nonce entries read as
    0 and absent asset-map entries mean the token is not registered.
    """

    chain_id: int
    supported_chains: frozenset = frozenset()
    addr_whitelist: frozenset = frozenset()
    func_whitelist: frozenset = frozenset()
    nonce_next: Mapping = field(default_factory=dict)
    used_nonces: frozenset = frozenset()
    balances: Mapping = field(default_factory=dict)
    balances_after: Mapping = field(default_factory=dict)
    asset_map: Mapping = field(default_factory=dict)
    actual_out: Optional[int] = None
    exec_price: Optional[Fraction] = None
    proof_verifier: Callable[[CrossChainMessage, bytes], bool] = field(default=DEFAULT_VERIFIER, compare=False)

    def balance_delta(self, address: int, token: int) -> int:
        return self.balances_after.get((address, token), 0) - self.balances.get((address, token), 0)


class PredicateId(str, Enum):
    # composite rules
    Ps1 = "Ps1"
    Ps2 = "Ps2"
    Ps3 = "Ps3"
    Pd1 = "Pd1"
    Pd2 = "Pd2"
    Pd3 = "Pd3"
    # atomic building blocks
    ChainId = "ChainId"
    ZeroAddr = "ZeroAddr"
    SupportedChains = "SupportedChains"
    Balance = "Balance"
    NonceNext = "NonceNext"
    NonceUnused = "NonceUnused"
    AddrWhitelist = "AddrWhitelist"
    FuncWhitelist = "FuncWhitelist"
    ValidProof = "ValidProof"
    AssetMap = "AssetMap"
    LockedCorrect = "LockedCorrect"
    UnlockedCorrect = "UnlockedCorrect"
    MinExecutionBounded = "MinExecutionBounded"
    ReferencePriceBounded = "ReferencePriceBounded"

    @property
    def is_composite(self) -> bool:
        return self.value[0] == "P" and self.value[-1].isdigit()


COMPOSITES = tuple(p for p in PredicateId if p.is_composite)
ATOMICS = tuple(p for p in PredicateId if not p.is_composite)

Props = Union[SourceProperties, DestinationProperties]


# ---------------------------------------------------------------- checks


def _locked_correct(p: SourceProperties, s: ChainState) -> bool:
    m = p.message
    return -s.balance_delta(m.sender, m.token) == m.amount


def _unlocked_correct(p: DestinationProperties, s: ChainState) -> bool:
    m = p.message
    mapped = s.asset_map.get((m.dest_chain, m.token))
    if mapped is None:
        return False
    return s.balance_delta(m.receiver, mapped) == m.amount


def _min_execution(p: SourceProperties, s: ChainState) -> bool:
    return s.actual_out is not None and s.actual_out >= p.slippage.min_out


def _reference_price(p: SourceProperties, s: ChainState) -> bool:
    if s.exec_price is None:
        return False
    ref = Fraction(p.slippage.reference_price)
    return abs(Fraction(s.exec_price) - ref) / ref <= Fraction(p.slippage.max_deviation_bps, 10_000)


def _valid_proof(p: DestinationProperties, s: ChainState) -> bool:
    if not p.signature:
        raise MissingSignature("destination proof check needs a non-empty signature")
    return bool(s.proof_verifier(p.message, p.signature))


@dataclass(frozen=True)
class Check:
    """One conjunct of a composite rule."""

    check_id: str
    uses: tuple
    sentence: str
    test: Callable[[Props, ChainState], bool] = field(compare=False, repr=False)


A = PredicateId
_CHECKS = {
    "receiver_nonzero": Check(
        "receiver_nonzero",
        (A.ZeroAddr,),
        "The receiver address must not be the zero address.",
        lambda p, s: p.message.receiver != ZERO_ADDRESS,
    ),
    "amount_positive": Check(
        "amount_positive",
        (),
        "The transferred amount must be strictly greater than zero.",
        lambda p, s: p.message.amount > 0,
    ),
    "dest_not_current": Check(
        "dest_not_current",
        (A.ChainId,),
        "The destination chain must differ from the chain processing the request.",
        lambda p, s: p.message.dest_chain != s.chain_id,
    ),
    "dest_is_current": Check(
        "dest_is_current",
        (A.ChainId,),
        "The destination chain named in the message must be the chain executing the release.",
        lambda p, s: p.message.dest_chain == s.chain_id,
    ),
    "token_whitelisted": Check(
        "token_whitelisted",
        (A.AddrWhitelist,),
        "The bridged token must be on the protocol's address whitelist.",
        lambda p, s: p.message.token in s.addr_whitelist,
    ),
    "nonce_expected": Check(
        "nonce_expected",
        (A.NonceNext,),
        "The nonce must equal the next nonce recorded for the sender.",
        lambda p, s: p.message.nonce == s.nonce_next.get(p.message.sender, 0),
    ),
    "dest_supported": Check(
        "dest_supported",
        (A.SupportedChains,),
        "The destination chain must be one the protocol supports.",
        lambda p, s: p.message.dest_chain in s.supported_chains,
    ),
    "nonce_unused": Check(
        "nonce_unused",
        (A.NonceUnused,),
        "The (source chain, nonce) pair must not have been consumed before.",
        lambda p, s: (p.message.source_chain, p.message.nonce) not in s.used_nonces,
    ),
    "source_supported": Check(
        "source_supported",
        (A.SupportedChains,),
        "The source chain must be one the protocol supports.",
        lambda p, s: p.message.source_chain in s.supported_chains,
    ),
    "proof_valid": Check(
        "proof_valid",
        (A.ValidProof,),
        "The attached signature or proof must verify against the full message.",
        _valid_proof,
    ),
    "ext_addr_whitelisted": Check(
        "ext_addr_whitelisted",
        (A.AddrWhitelist,),
        "Any external contract the bridge calls must be on the address whitelist.",
        lambda p, s: p.ext_addr in s.addr_whitelist,
    ),
    "ext_func_whitelisted": Check(
        "ext_func_whitelisted",
        (A.FuncWhitelist,),
        "Any external function selector the bridge invokes must be on the function whitelist.",
        lambda p, s: p.ext_func in s.func_whitelist,
    ),
    "locked_correct": Check(
        "locked_correct",
        (A.LockedCorrect, A.Balance),
        "The sender's token balance must drop by exactly the bridged amount when assets are locked or burnt.",
        _locked_correct,
    ),
    "min_execution_bounded": Check(
        "min_execution_bounded",
        (A.MinExecutionBounded,),
        "The amount the user actually receives must be at least the declared minimum output.",
        _min_execution,
    ),
    "reference_price_bounded": Check(
        "reference_price_bounded",
        (A.ReferencePriceBounded,),
        "The execution price must stay within the allowed deviation from the reference price.",
        _reference_price,
    ),
    "unlocked_correct": Check(
        "unlocked_correct",
        (A.UnlockedCorrect, A.Balance, A.AssetMap),
        "The receiver's balance of the mapped destination token must rise by exactly the bridged amount.",
        _unlocked_correct,
    ),
}


@dataclass(frozen=True)
class RuleSpec:
    rule_id: str
    side: str
    dimension: str
    title: str
    description: str
    checks: tuple


RULES: dict[PredicateId, RuleSpec] = {
    A.Ps1: RuleSpec(
        "Ps1",
        "source",
        "integrity",
        "Source request sanity",
        "A request accepted on the source chain must be well formed before any asset moves.",
        ("receiver_nonzero", "amount_positive", "dest_not_current"),
    ),
    A.Pd1: RuleSpec(
        "Pd1",
        "destination",
        "integrity",
        "Destination request sanity",
        "A message processed on the destination chain must be well formed and addressed to this chain.",
        ("receiver_nonzero", "amount_positive", "dest_is_current"),
    ),
    A.Ps2: RuleSpec(
        "Ps2",
        "source",
        "authenticity",
        "Source request authorization",
        "The source chain must only emit messages for approved tokens and routes, each with a fresh sequential nonce.",
        ("token_whitelisted", "nonce_expected", "dest_supported"),
    ),
    A.Pd2: RuleSpec(
        "Pd2",
        "destination",
        "authenticity",
        "Destination message authentication",
        "The destination chain must accept each message once, only from supported origins, and only with a valid proof.",
        ("nonce_unused", "source_supported", "proof_valid"),
    ),
    A.Ps3: RuleSpec(
        "Ps3",
        "source",
        "safety",
        "Source execution safety",
        "Executing a deposit must not call arbitrary code, must move exactly the declared funds, and must respect slippage limits.",
        ("ext_addr_whitelisted", "ext_func_whitelisted", "locked_correct", "min_execution_bounded", "reference_price_bounded"),
    ),
    A.Pd3: RuleSpec(
        "Pd3",
        "destination",
        "safety",
        "Destination execution safety",
        "Releasing funds must not call arbitrary code and must credit exactly the declared amount of the mapped asset.",
        ("ext_addr_whitelisted", "ext_func_whitelisted", "unlocked_correct"),
    ),
}

SIDE_RULES = {
    "source": (A.Ps1, A.Ps2, A.Ps3),
    "destination": (A.Pd1, A.Pd2, A.Pd3),
}


def check(check_id: str) -> Check:
    return _CHECKS[check_id]


def check_for_item(rule_id: str, item: str) -> Optional[str]:
    """Id of the check whose checklist sentence is ``item`` within ``rule_id``."""
    try:
        rule = RULES[PredicateId(rule_id)]
    except (ValueError, KeyError):
        return None
    return next((c for c in rule.checks if _CHECKS[c].sentence == item), None)


def eval_check(check_id: str, props: Props, state: ChainState) -> bool:
    return bool(_CHECKS[check_id].test(props, state))


def _side_of(props: Props) -> str:
    if isinstance(props, SourceProperties):
        return "source"
    if isinstance(props, DestinationProperties):
        return "destination"
    raise TypeError(f"not a property set: {type(props).__name__}")


def eval_predicate(pid: Union[PredicateId, str], props: Props, state: ChainState) -> bool:
    """Evaluate a composite rule, or an atomic predicate as used on this side.

    An atomic id evaluates the conjunction of the side's checks that rely on
    it; it is an error to ask for one the side never uses.
    """
    pid = PredicateId(pid)
    side = _side_of(props)
    if pid.is_composite:
        rule = RULES[pid]
        if rule.side != side:
            raise SideMismatch(f"{pid.value} is a {rule.side} rule but got {side} properties")
        # evaluate every conjunct so a missing signature is always reported
        results = [eval_check(c, props, state) for c in rule.checks]
        return all(results)
    used = [c for r in SIDE_RULES[side] for c in RULES[r].checks if pid in _CHECKS[c].uses]
    if not used:
        raise PredicateError(f"{pid.value} is not checked on the {side} side")
    return all(eval_check(c, props, state) for c in dict.fromkeys(used))


def execution_condition(side: str, props: Props, state: ChainState) -> bool:
    """True iff all three rules of ``side`` hold."""
    if side not in SIDE_RULES:
        raise ValueError(f"unknown side {side!r}")
    if _side_of(props) != side:
        raise SideMismatch(f"{side} condition evaluated on {_side_of(props)} properties")
    results = [eval_predicate(pid, props, state) for pid in SIDE_RULES[side]]
    return all(results)


# ---------------------------------------------------------------- rendering


@dataclass(frozen=True)
class RenderedRule:
    rule_id: str
    title: str
    description: str
    checklist: tuple
    side: str
    dimension: str

    def to_document(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "side": self.side,
            "dimension": self.dimension,
            "title": self.title,
            "description": self.description,
            "checklist": list(self.checklist),
        }


def render_predicate_nl(pid: Union[PredicateId, str]) -> RenderedRule:
    pid = PredicateId(pid)
    if not pid.is_composite:
        raise PredicateError(f"only composite rules are rendered, got {pid.value}")
    rule = RULES[pid]
    return RenderedRule(
        rule_id=rule.rule_id,
        title=rule.title,
        description=rule.description,
        checklist=tuple(_CHECKS[c].sentence for c in rule.checks),
        side=rule.side,
        dimension=rule.dimension,
    )


def rules_for_side(side_hint: str) -> list[RenderedRule]:
    """Rendered rules relevant to a transaction side; ``unknown`` gets all six."""
    pids = SIDE_RULES.get(side_hint, SIDE_RULES["source"] + SIDE_RULES["destination"])
    return [render_predicate_nl(p) for p in pids]


def catalog_document() -> list[dict]:
    return [render_predicate_nl(p).to_document() for p in COMPOSITES]


# ---------------------------------------------------------------- properties


@dataclass(frozen=True)
class PropertySpec:
    name: str
    description: str
    expected_role: str


_MESSAGE_PROPS = (
    PropertySpec("source_chain", "Identifier of the chain where the transfer originates.", "routing"),
    PropertySpec("sender", "Address that initiated the transfer on the source chain.", "identity"),
    PropertySpec("dest_chain", "Identifier of the chain where the funds are delivered.", "routing"),
    PropertySpec("receiver", "Address credited on the destination chain.", "identity"),
    PropertySpec("token", "Address of the token being bridged.", "asset"),
    PropertySpec("amount", "Quantity of tokens moved, in base units.", "value"),
    PropertySpec("nonce", "Sequence number that makes each message unique.", "replay-protection"),
)


def properties_for_side(side: str) -> list[PropertySpec]:
    if side == "source":
        extra = (
            PropertySpec("ext_addr", "Contract the source side calls out to while executing the deposit.", "external-call"),
            PropertySpec("ext_func", "Function selector invoked on that external contract.", "external-call"),
            PropertySpec("slippage", "Minimum output and price-deviation limits for any swap on the way.", "price-protection"),
        )
    elif side == "destination":
        extra = (
            PropertySpec("ext_addr", "Contract the destination side calls out to while releasing funds.", "external-call"),
            PropertySpec("ext_func", "Function selector invoked on that external contract.", "external-call"),
            PropertySpec("signature", "Proof or signature attesting that the message was really sent.", "authorization"),
        )
    else:
        raise ValueError(f"unknown side {side!r}")
    return list(_MESSAGE_PROPS + extra)


# ---------------------------------------------------------------- state transitions


def apply_source(props: SourceProperties, state: ChainState) -> ChainState:
    """State after a successful deposit: the sender's nonce advances."""
    nonces = dict(state.nonce_next)
    sender = props.message.sender
    nonces[sender] = nonces.get(sender, 0) + 1
    return replace(state, nonce_next=nonces)


def apply_destination(props: DestinationProperties, state: ChainState) -> ChainState:
    """State after a successful release: the (source chain, nonce) pair is spent."""
    m = props.message
    return replace(state, used_nonces=state.used_nonces | {(m.source_chain, m.nonce)})
