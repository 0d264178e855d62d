"""Seller and buyer state machines for the transaction phase.

Sessions are pure decision-makers: handlers consume one message or wake-up
and return the action to take (a message to send, a contract to publish, a
claim to submit). A driver executes those actions against the transport and
the ledger, so the same session code runs under the deterministic scenario
runner and under exhaustive adversarial scheduling.

Deviation policies model the classic failure modes of an unprotected trade:
a buyer who never pays or underpays, a seller who withholds the key, claims
with garbage, or ships corrupted goods.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Union

from . import cert, crypto, ledger
from .cert import (
    Certificate,
    CertificatePackage,
    Commitment2,
    GroupPower,
    HashOfKey,
    HashOfKeyAndNotary,
    PartyId,
    Variant,
)
from .crypto import Ciphertext, GroupParams, Scalar
from .ledger import (
    Condition,
    DlogLock,
    EscrowContract,
    HashLock,
    LedgerEvent,
    NotaryHashLock,
    Witness,
    address_for,
)


class SellerPolicy(Enum):
    HONEST = "honest"
    WITHHOLD_KEY = "withhold_key"
    CLAIM_WRONG_WITNESS = "claim_wrong_witness"
    SEND_CORRUPT_CIPHERTEXT = "send_corrupt_ciphertext"
    SEND_MISMATCHED_H2 = "send_mismatched_h2"


@dataclass(frozen=True)
class ScenarioReport:
    """Terminal-state summary of one run, the observable fairness is judged on.

    Every flag is computed from ledger events and session terminal states
    alone; balances are keyed by role name.
    """

    variant: str
    seed: int
    seller_state: str
    buyer_state: str
    buyer_has_plaintext: bool
    seller_paid: bool
    notary_paid: bool
    buyer_refunded: bool
    buyer_decrypt_failed: bool
    abort_reason: str | None
    balances: dict[str, int]
    price: int
    event_count: int
    event_log_path: str | None = None


class BuyerPolicy(Enum):
    HONEST = "honest"
    NEVER_PUBLISH_CONTRACT = "never_publish_contract"
    PUBLISH_UNDERPRICED_CONTRACT = "publish_underpriced_contract"
    REFUND_EAGERLY = "refund_eagerly"


class AbortReason(Enum):
    UNKNOWN_NOTARY = "unknown_notary"
    BAD_SIGNATURE = "bad_signature"
    CIPHERTEXT_MISMATCH = "ciphertext_mismatch"
    SELLER_MISMATCH = "seller_mismatch"
    PRICE_MISMATCH = "price_mismatch"
    VARIANT_MISMATCH = "variant_mismatch"
    GROUP_MISMATCH = "group_mismatch"
    INSUFFICIENT_FUNDS = "insufficient_funds"


_REJECT_TO_ABORT = {
    cert.RejectReason.UNKNOWN_NOTARY: AbortReason.UNKNOWN_NOTARY,
    cert.RejectReason.BAD_SIGNATURE: AbortReason.BAD_SIGNATURE,
    cert.RejectReason.CIPHERTEXT_MISMATCH: AbortReason.CIPHERTEXT_MISMATCH,
    cert.RejectReason.SELLER_MISMATCH: AbortReason.SELLER_MISMATCH,
}


# ---------------------------------------------------------------------------
# Off-chain messages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Offer:
    """Everything the buyer needs to verify the certificate and decide to pay."""

    variant: Variant
    sigma: bytes
    ciphertext: Ciphertext
    h1: bytes
    h2: Commitment2
    seller_id: PartyId
    notary_id: PartyId
    price: int
    meta: str = ""


@dataclass(frozen=True)
class Blind:
    """The buyer's blinding scalar, sent over the private channel only."""

    r: Scalar


@dataclass(frozen=True)
class ContractRef:
    contract_id: int


@dataclass(frozen=True)
class AbortMessage:
    reason: str


ProtocolMessage = Union[Offer, Blind, ContractRef, AbortMessage]


def message_to_obj(message: ProtocolMessage) -> dict:
    if isinstance(message, Offer):
        obj = {
            "type": "offer",
            "variant": message.variant.value,
            "sigma": message.sigma.hex(),
            "ciphertext": {
                "nonce": message.ciphertext.nonce.hex(),
                "body": message.ciphertext.body.hex(),
            },
            "h1": message.h1.hex(),
            "h2": cert.commitment_to_obj(message.h2),
            "seller_id": message.seller_id.id.hex(),
            "notary_id": message.notary_id.id.hex(),
            "price": message.price,
            "meta": message.meta,
        }
        if isinstance(message.h2, GroupPower):
            obj["group"] = cert.group_to_obj(message.h2.element.params)
        return obj
    if isinstance(message, Blind):
        group = message.r.params
        return {
            "type": "blind",
            "r": str(message.r.value),
            "group": cert.group_to_obj(group),
        }
    if isinstance(message, ContractRef):
        return {"type": "contract_ref", "contract_id": message.contract_id}
    return {"type": "abort", "reason": message.reason}


def message_from_obj(obj: dict) -> ProtocolMessage:
    kind = obj["type"]
    if kind == "offer":
        group = cert.group_from_obj(obj["group"]) if "group" in obj else None
        return Offer(
            variant=Variant(obj["variant"]),
            sigma=bytes.fromhex(obj["sigma"]),
            ciphertext=Ciphertext(
                nonce=bytes.fromhex(obj["ciphertext"]["nonce"]),
                body=bytes.fromhex(obj["ciphertext"]["body"]),
            ),
            h1=bytes.fromhex(obj["h1"]),
            h2=cert.commitment_from_obj(obj["h2"], group),
            seller_id=PartyId(bytes.fromhex(obj["seller_id"])),
            notary_id=PartyId(bytes.fromhex(obj["notary_id"])),
            price=int(obj["price"]),
            meta=obj.get("meta", ""),
        )
    if kind == "blind":
        group = cert.group_from_obj(obj["group"])
        return Blind(r=Scalar(int(obj["r"]), group))
    if kind == "contract_ref":
        return ContractRef(contract_id=int(obj["contract_id"]))
    if kind == "abort":
        return AbortMessage(reason=obj["reason"])
    raise ValueError(f"unknown message type {kind!r}")


# ---------------------------------------------------------------------------
# Buyer session
# ---------------------------------------------------------------------------

class BuyerState(Enum):
    INIT = "init"
    OFFER_RECEIVED = "offer_received"
    VERIFIED = "verified"
    BLINDED = "blinded"
    CONTRACT_PUBLISHED = "contract_published"
    SETTLED = "settled"
    REFUNDED = "refunded"
    ABORTED = "aborted"


BUYER_TERMINAL = frozenset({BuyerState.SETTLED, BuyerState.REFUNDED, BuyerState.ABORTED})


@dataclass
class BuyerConfig:
    address: bytes
    seller: PartyId
    price: int
    deadline_offset: int
    trusted_notaries: Mapping[bytes, bytes]
    variant: Variant
    notary_fee: int = 0
    group: GroupParams | None = None


@dataclass(frozen=True)
class PublishPlan:
    """A contract the buyer wants on-chain, plus the blind to send first (dlog)."""

    condition: Condition
    amount: int
    deadline: int
    payee: bytes
    blind: Scalar | None = None


@dataclass(frozen=True)
class AbortDecision:
    reason: AbortReason


BuyerDecision = Union[PublishPlan, AbortDecision, None]


class BuyerSession:
    """The paying side: verify the offer, escrow the price, recover the key."""

    def __init__(self, config: BuyerConfig, policy: BuyerPolicy, rng: random.Random) -> None:
        self.config = config
        self.policy = policy
        self.rng = rng
        self.state = BuyerState.INIT
        self.offer: Offer | None = None
        self.contract_id: int | None = None
        self.blind: Scalar | None = None
        self.plaintext: bytes | None = None
        self.decrypt_failed = False
        self.abort_reason: AbortReason | None = None

    @property
    def terminal(self) -> bool:
        return self.state in BUYER_TERMINAL

    def on_offer(self, offer: Offer, now: int) -> BuyerDecision:
        """Verify and, unless policy or verification says otherwise, plan payment."""
        if self.state is not BuyerState.INIT:
            return None
        self.state = BuyerState.OFFER_RECEIVED
        self.offer = offer

        if offer.price != self.config.price:
            return self._abort(AbortReason.PRICE_MISMATCH)
        # The commitment type is what the condition will be built from, so a
        # lying variant field must not be able to downgrade the session.
        if (
            offer.variant is not self.config.variant
            or cert.commitment_variant(offer.h2) is not self.config.variant
        ):
            return self._abort(AbortReason.VARIANT_MISMATCH)
        certificate = Certificate(
            h1=offer.h1,
            h2=offer.h2,
            seller_id=offer.seller_id,
            notary_id=offer.notary_id,
            sigma=offer.sigma,
            group=offer.h2.element.params if isinstance(offer.h2, GroupPower) else None,
        )
        verdict = cert.verify_certificate(
            certificate, self.config.trusted_notaries, self.config.seller, offer.ciphertext
        )
        if not verdict:
            return self._abort(_REJECT_TO_ABORT[verdict.reason])
        if isinstance(offer.h2, GroupPower) and offer.h2.element.params != self.config.group:
            return self._abort(AbortReason.GROUP_MISMATCH)
        self.state = BuyerState.VERIFIED

        if self.policy is BuyerPolicy.NEVER_PUBLISH_CONTRACT:
            return None

        amount = self.config.price
        if self.policy is BuyerPolicy.PUBLISH_UNDERPRICED_CONTRACT:
            # Stay above the notary fee so the deviant contract is still legal.
            amount = max(self.config.notary_fee + 1, self.config.price // 2)

        blind: Scalar | None = None
        condition: Condition
        if isinstance(offer.h2, HashOfKey):
            condition = HashLock(h2=offer.h2.digest)
        elif isinstance(offer.h2, HashOfKeyAndNotary):
            condition = NotaryHashLock(
                h2=offer.h2.digest,
                notary=address_for(offer.notary_id.id),
                fee=self.config.notary_fee,
            )
        else:
            blind = crypto.draw_scalar(self.rng, self.config.group)
            self.blind = blind
            c = crypto.group_exp(self.config.group, offer.h2.element, blind)
            condition = DlogLock(c=c)
            self.state = BuyerState.BLINDED

        return PublishPlan(
            condition=condition,
            amount=amount,
            deadline=now + self.config.deadline_offset,
            payee=address_for(offer.seller_id.id),
            blind=blind,
        )

    def note_contract(self, contract_id: int) -> None:
        self.contract_id = contract_id
        self.state = BuyerState.CONTRACT_PUBLISHED

    def note_publish_failed(self, reason: AbortReason) -> None:
        self._abort(reason)

    def on_claim(self, event: LedgerEvent) -> bytes | None:
        """Recover the key from the published witness and decrypt.

        A failed authenticated decrypt marks the session rather than raising:
        the funds are already gone, which is exactly what the fairness report
        needs to surface. Unreachable when the notary was honest, since the
        ledger only accepts witnesses that open the committed key.
        """
        if self.state is not BuyerState.CONTRACT_PUBLISHED:
            return None
        if event.contract_id != self.contract_id or event.witness is None:
            return None
        witness = event.witness
        if isinstance(witness, ledger.Exponent):
            recovered = crypto.scalar_mul(witness.x, crypto.scalar_inv(self.blind))
            key = crypto.symmetric_key_for_scalar(recovered)
        else:
            key = witness.x
        try:
            self.plaintext = crypto.decrypt(key, self.offer.ciphertext)
        except (crypto.AuthenticationFailure, ValueError):
            self.decrypt_failed = True
            return None
        self.state = BuyerState.SETTLED
        return self.plaintext

    def check_timeout(self, now: int, chain: ledger.Ledger) -> int | None:
        """Contract id to refund, or None.

        Honest buyers wait for strict expiry; an eager buyer fires on every
        wake-up and lets the ledger reject premature attempts.
        """
        if self.contract_id is None or self.state is not BuyerState.CONTRACT_PUBLISHED:
            return None
        contract = chain.get_contract(self.contract_id)
        if contract.state is not ledger.ContractState.OPEN:
            return None
        if self.policy is BuyerPolicy.REFUND_EAGERLY:
            return self.contract_id
        if now > contract.deadline:
            return self.contract_id
        return None

    def note_refunded(self) -> None:
        self.state = BuyerState.REFUNDED

    def _abort(self, reason: AbortReason) -> AbortDecision:
        self.state = BuyerState.ABORTED
        self.abort_reason = reason
        return AbortDecision(reason)


# ---------------------------------------------------------------------------
# Seller session
# ---------------------------------------------------------------------------

class SellerState(Enum):
    INIT = "init"
    OFFER_SENT = "offer_sent"
    AWAITING_CONTRACT = "awaiting_contract"
    AWAITING_BLIND = "awaiting_blind"
    CLAIMED = "claimed"
    EXPIRED = "expired"


SELLER_TERMINAL = frozenset({SellerState.CLAIMED, SellerState.EXPIRED})


class ContractMismatch(Exception):
    """The published contract does not pay the agreed terms; decline to claim."""


@dataclass(frozen=True)
class ClaimRequest:
    contract_id: int
    witness: Witness


class SellerSession:
    """The selling side: make the offer, then claim by publishing the witness."""

    def __init__(
        self,
        package: CertificatePackage,
        address: bytes,
        price: int,
        policy: SellerPolicy,
        rng: random.Random,
        meta: str = "",
    ) -> None:
        self.package = package
        self.address = address
        self.price = price
        self.policy = policy
        self.rng = rng
        self.meta = meta
        self.variant = package.certificate.variant
        self.state = SellerState.INIT
        self.blind: Scalar | None = None
        self.contract: EscrowContract | None = None
        self.claim_attempted = False
        self.outcome = ""

    @property
    def terminal(self) -> bool:
        return self.state in SELLER_TERMINAL

    def start(self) -> Offer:
        """Produce the offer, faithful or corrupted according to policy."""
        certificate = self.package.certificate
        ciphertext = self.package.ciphertext
        h2 = certificate.h2
        if self.policy is SellerPolicy.SEND_CORRUPT_CIPHERTEXT:
            body = bytearray(ciphertext.body)
            body[0] ^= 0x01
            ciphertext = Ciphertext(nonce=ciphertext.nonce, body=bytes(body))
        elif self.policy is SellerPolicy.SEND_MISMATCHED_H2:
            h2 = self._mismatched_h2()
        self.state = SellerState.OFFER_SENT
        return Offer(
            variant=self.variant,
            sigma=certificate.sigma,
            ciphertext=ciphertext,
            h1=certificate.h1,
            h2=h2,
            seller_id=certificate.seller_id,
            notary_id=certificate.notary_id,
            price=self.price,
            meta=self.meta,
        )

    def on_blind(self, r: Scalar, now: int) -> ClaimRequest | None:
        if self.terminal:
            return None
        self.blind = r
        if self.contract is not None:
            return self._decide_claim(now)
        if self.state is SellerState.OFFER_SENT:
            self.state = SellerState.AWAITING_CONTRACT
        return None

    def on_contract(self, contract: EscrowContract, now: int) -> ClaimRequest | None:
        if self.terminal or self.claim_attempted:
            return None
        self.contract = contract
        if self.variant is Variant.V3 and self.blind is None:
            self.state = SellerState.AWAITING_BLIND
            return None
        return self._decide_claim(now)

    def on_abort(self, reason: str) -> None:
        if not self.terminal:
            self.state = SellerState.EXPIRED
            self.outcome = f"counterparty aborted: {reason}"

    def on_timer(self, now: int) -> None:
        if not self.terminal:
            self.state = SellerState.EXPIRED
            if not self.outcome:
                self.outcome = "deadline passed without settlement"

    def note_claimed(self) -> None:
        self.state = SellerState.CLAIMED

    def note_claim_failed(self, detail: str) -> None:
        self.outcome = f"claim rejected: {detail}"

    def build_witness(self, contract: EscrowContract, blind: Scalar | None = None) -> Witness:
        """The honest witness for a matching contract.

        Raises ContractMismatch when the contract's payee, amount, state, or
        condition diverge from the agreed terms, so underpriced or
        mis-targeted contracts never tempt an honest seller into revealing.
        """
        if contract.payee != self.address:
            raise ContractMismatch("contract does not pay this seller")
        if contract.amount != self.price:
            raise ContractMismatch(
                f"contract amount {contract.amount} differs from agreed price {self.price}"
            )
        if contract.state is not ledger.ContractState.OPEN:
            raise ContractMismatch("contract is no longer open")
        certificate = self.package.certificate
        if self.variant is Variant.V1:
            if not isinstance(contract.condition, HashLock):
                raise ContractMismatch("expected a hash-lock condition")
            if contract.condition.h2 != certificate.h2.digest:
                raise ContractMismatch("condition digest does not match the certificate")
            return ledger.Preimage(x=self.package.key)
        if self.variant is Variant.V2:
            if not isinstance(contract.condition, NotaryHashLock):
                raise ContractMismatch("expected a notary-split condition")
            if contract.condition.h2 != certificate.h2.digest:
                raise ContractMismatch("condition digest does not match the certificate")
            return ledger.PreimageWithNotary(
                x=self.package.key, notary_id=certificate.notary_id.id
            )
        if not isinstance(contract.condition, DlogLock):
            raise ContractMismatch("expected a discrete-log condition")
        if blind is None:
            raise ContractMismatch("no blinding scalar received yet")
        group = certificate.group
        if blind.params != group:
            raise ContractMismatch("blinding scalar from a different group")
        exponent = crypto.scalar_from_key(self.package.key, group)
        x = crypto.scalar_mul(exponent, blind)
        expected = crypto.group_exp(group, certificate.h2.element, blind)
        if contract.condition.c != expected:
            raise ContractMismatch("contract condition was not blinded from this offer")
        return ledger.Exponent(x=x)

    def _decide_claim(self, now: int) -> ClaimRequest | None:
        contract = self.contract
        if self.policy is SellerPolicy.WITHHOLD_KEY:
            self.outcome = "withheld the key"
            return None
        if self.policy is SellerPolicy.CLAIM_WRONG_WITNESS:
            self.claim_attempted = True
            return ClaimRequest(contract.id, self._garbage_witness(contract.condition))
        if now > contract.deadline:
            self.outcome = "contract already expired"
            return None
        try:
            witness = self.build_witness(contract, self.blind)
        except ContractMismatch as exc:
            self.outcome = f"declined: {exc}"
            return None
        self.claim_attempted = True
        return ClaimRequest(contract.id, witness)

    def _mismatched_h2(self) -> Commitment2:
        certificate = self.package.certificate
        if self.variant is Variant.V3:
            group = certificate.group
            while True:
                wrong = crypto.group_exp(group, group.g, crypto.draw_scalar(self.rng, group))
                if wrong != certificate.h2.element:
                    return GroupPower(wrong)
        garbage = crypto.sha256(self.rng.randbytes(32))
        if self.variant is Variant.V1:
            return HashOfKey(garbage)
        return HashOfKeyAndNotary(garbage)

    def _garbage_witness(self, condition: Condition) -> Witness:
        if isinstance(condition, HashLock):
            while True:
                x = self.rng.randbytes(crypto.KEY_LEN)
                if x != self.package.key:
                    return ledger.Preimage(x=x)
        if isinstance(condition, NotaryHashLock):
            while True:
                x = self.rng.randbytes(crypto.KEY_LEN)
                if x != self.package.key:
                    return ledger.PreimageWithNotary(
                        x=x, notary_id=self.package.certificate.notary_id.id
                    )
        group = condition.group
        honest: Scalar | None = None
        if self.blind is not None:
            exponent = crypto.scalar_from_key(self.package.key, group)
            if exponent is not None:
                honest = crypto.scalar_mul(exponent, self.blind)
        while True:
            x = crypto.draw_scalar(self.rng, group)
            if honest is None or x != honest:
                return ledger.Exponent(x=x)
