"""Simulated blockchain: token accounts, conditional escrow, public event log.

A single serialized state machine. Every operation either completes
atomically or raises and leaves no trace. The append-only event log is what
"on-chain" means here: all parties can read it, including published
witnesses. Time is a logical tick counter advanced explicitly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Union

from . import crypto
from .crypto import GroupElement, GroupParams, Scalar

ADDRESS_LEN = 32
DEFAULT_DEADLINE_OFFSET = 100


def address_for(party_id: bytes) -> bytes:
    """Deterministic account address for a party identity."""
    return crypto.sha256(crypto.canonical_encode([b"sedg-address", party_id]))


class LedgerError(Exception):
    pass


class UnknownContract(LedgerError):
    pass


class InsufficientFunds(LedgerError):
    pass


class PastDeadline(LedgerError):
    pass


class WrongWitness(LedgerError):
    pass


class Expired(LedgerError):
    pass


class AlreadySettled(LedgerError):
    pass


class VariantMismatch(LedgerError):
    pass


class NotExpired(LedgerError):
    pass


class NotPayer(LedgerError):
    pass


# ---------------------------------------------------------------------------
# Conditions and witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HashLock:
    """Pay the payee on any x with sha256(x) = h2."""

    h2: bytes


@dataclass(frozen=True)
class NotaryHashLock:
    """Pay payee and notary together on (x, n) with sha256(encode([x, n])) = h2."""

    h2: bytes
    notary: bytes
    fee: int


@dataclass(frozen=True)
class DlogLock:
    """Pay the payee on any exponent x with g^x = c in c's group.

    c is stored pre-blinded by the payer; the chain never sees the
    certificate's own commitment.
    """

    c: GroupElement

    @property
    def group(self) -> GroupParams:
        return self.c.params


Condition = Union[HashLock, NotaryHashLock, DlogLock]


@dataclass(frozen=True)
class Preimage:
    x: bytes


@dataclass(frozen=True)
class PreimageWithNotary:
    x: bytes
    notary_id: bytes


@dataclass(frozen=True)
class Exponent:
    x: Scalar


Witness = Union[Preimage, PreimageWithNotary, Exponent]

_CONDITION_WITNESS = {
    HashLock: Preimage,
    NotaryHashLock: PreimageWithNotary,
    DlogLock: Exponent,
}


def witness_matches_variant(condition: Condition, witness: Witness) -> bool:
    return _CONDITION_WITNESS[type(condition)] is type(witness)


def evaluate_condition(condition: Condition, witness: Witness) -> bool:
    """The claim predicate, assuming the variant already matches."""
    if isinstance(condition, HashLock):
        assert isinstance(witness, Preimage)
        return crypto.sha256(witness.x) == condition.h2
    if isinstance(condition, NotaryHashLock):
        assert isinstance(witness, PreimageWithNotary)
        digest = crypto.sha256(crypto.canonical_encode([witness.x, witness.notary_id]))
        return digest == condition.h2
    assert isinstance(witness, Exponent)
    group = condition.group
    return pow(group.g, witness.x.value, group.p) == condition.c.value


# ---------------------------------------------------------------------------
# Contracts and events
# ---------------------------------------------------------------------------

class ContractState(Enum):
    OPEN = "open"
    CLAIMED = "claimed"
    REFUNDED = "refunded"


@dataclass
class EscrowContract:
    id: int
    payer: bytes
    payee: bytes
    amount: int
    condition: Condition
    deadline: int
    state: ContractState = ContractState.OPEN


class EventKind(Enum):
    FUNDED = "funded"
    CONTRACT_PUBLISHED = "contract_published"
    CLAIMED = "claimed"
    REFUNDED = "refunded"
    TIME_ADVANCED = "time_advanced"


@dataclass(frozen=True)
class Payout:
    to: bytes
    amount: int


@dataclass(frozen=True)
class LedgerEvent:
    """One public log entry; unused fields stay at their defaults per kind."""

    seq: int
    tick: int
    kind: EventKind
    contract_id: int | None = None
    account: bytes | None = None
    amount: int | None = None
    payer: bytes | None = None
    payee: bytes | None = None
    deadline: int | None = None
    condition: Condition | None = None
    witness: Witness | None = None
    payouts: tuple[Payout, ...] = ()


# ---------------------------------------------------------------------------
# The ledger itself
# ---------------------------------------------------------------------------

class Ledger:
    """Single-writer account/escrow state machine with an append-only log."""

    def __init__(self) -> None:
        self._balances: dict[bytes, int] = {}
        self._contracts: dict[int, EscrowContract] = {}
        self._events: list[LedgerEvent] = []
        self._tick = 0
        self._next_contract_id = 1

    @property
    def current_tick(self) -> int:
        return self._tick

    def get_balance(self, account: bytes) -> int:
        return self._balances.get(account, 0)

    def get_contract(self, contract_id: int) -> EscrowContract:
        contract = self._contracts.get(contract_id)
        if contract is None:
            raise UnknownContract(f"no contract {contract_id}")
        return replace(contract)

    def open_contracts(self) -> list[EscrowContract]:
        return [replace(c) for c in self._contracts.values() if c.state is ContractState.OPEN]

    def read_events(self, from_seq: int = 0) -> list[LedgerEvent]:
        return self._events[from_seq:]

    def fund(self, account: bytes, amount: int) -> int:
        """Credit an account from outside the system; returns the new balance."""
        if amount <= 0:
            raise LedgerError("funding amount must be positive")
        self._balances[account] = self.get_balance(account) + amount
        self._append(EventKind.FUNDED, account=account, amount=amount)
        return self._balances[account]

    def publish_contract(
        self,
        payer: bytes,
        payee: bytes,
        amount: int,
        condition: Condition,
        deadline: int | None = None,
    ) -> int:
        """Escrow `amount` from the payer under a claim condition."""
        if amount <= 0:
            raise LedgerError("contract amount must be positive")
        if isinstance(condition, NotaryHashLock):
            if condition.fee < 0 or condition.fee > amount:
                raise LedgerError("notary fee must be within the contract amount")
        if deadline is None:
            deadline = self._tick + DEFAULT_DEADLINE_OFFSET
        if deadline <= self._tick:
            raise PastDeadline(f"deadline {deadline} is not after tick {self._tick}")
        if self.get_balance(payer) < amount:
            raise InsufficientFunds(f"balance {self.get_balance(payer)} < {amount}")

        contract_id = self._next_contract_id
        self._next_contract_id += 1
        self._balances[payer] -= amount
        self._contracts[contract_id] = EscrowContract(
            id=contract_id,
            payer=payer,
            payee=payee,
            amount=amount,
            condition=condition,
            deadline=deadline,
        )
        self._append(
            EventKind.CONTRACT_PUBLISHED,
            contract_id=contract_id,
            payer=payer,
            payee=payee,
            amount=amount,
            deadline=deadline,
            condition=condition,
        )
        return contract_id

    def claim(self, contract_id: int, witness: Witness) -> LedgerEvent:
        """Settle a contract by exhibiting a satisfying witness.

        The witness becomes public in the settlement event; for the
        notary-split variant, payee and notary are credited in the same
        atomic settlement.
        """
        contract = self._contracts.get(contract_id)
        if contract is None:
            raise UnknownContract(f"no contract {contract_id}")
        self._ensure_open(contract)
        if self._tick > contract.deadline:
            raise Expired(f"tick {self._tick} past deadline {contract.deadline}")
        if not witness_matches_variant(contract.condition, witness):
            raise VariantMismatch(
                f"{type(witness).__name__} cannot open {type(contract.condition).__name__}"
            )
        if not self._condition_holds(contract.condition, witness):
            raise WrongWitness("the witness does not satisfy the condition")

        if isinstance(contract.condition, NotaryHashLock):
            fee = contract.condition.fee
            payouts = (
                Payout(to=contract.payee, amount=contract.amount - fee),
                Payout(to=contract.condition.notary, amount=fee),
            )
        else:
            payouts = (Payout(to=contract.payee, amount=contract.amount),)
        contract.state = ContractState.CLAIMED
        for payout in payouts:
            self._balances[payout.to] = self.get_balance(payout.to) + payout.amount
        return self._append(
            EventKind.CLAIMED,
            contract_id=contract_id,
            witness=witness,
            payouts=payouts,
        )

    def refund(self, contract_id: int, caller: bytes) -> LedgerEvent:
        """Return an expired contract's escrow to the payer."""
        contract = self._contracts.get(contract_id)
        if contract is None:
            raise UnknownContract(f"no contract {contract_id}")
        self._ensure_open(contract)
        if self._tick <= contract.deadline:
            raise NotExpired(f"tick {self._tick} not past deadline {contract.deadline}")
        if caller != contract.payer:
            raise NotPayer("only the payer may reclaim an expired escrow")

        contract.state = ContractState.REFUNDED
        self._balances[contract.payer] = self.get_balance(contract.payer) + contract.amount
        return self._append(EventKind.REFUNDED, contract_id=contract_id)

    def advance_time(self, ticks: int) -> int:
        """Move logical time forward; a zero advance is a silent no-op."""
        if ticks < 0:
            raise LedgerError("time cannot run backwards")
        if ticks == 0:
            return self._tick
        self._tick += ticks
        self._append(EventKind.TIME_ADVANCED)
        return self._tick

    # Seams kept narrow on purpose: test fixtures override these to model a
    # faulty chain and prove the violation detector actually fires.
    def _condition_holds(self, condition: Condition, witness: Witness) -> bool:
        return evaluate_condition(condition, witness)

    def _ensure_open(self, contract: EscrowContract) -> None:
        if contract.state is not ContractState.OPEN:
            raise AlreadySettled(f"contract {contract.id} is {contract.state.value}")

    def _append(self, kind: EventKind, **fields) -> LedgerEvent:
        event = LedgerEvent(seq=len(self._events), tick=self._tick, kind=kind, **fields)
        self._events.append(event)
        return event

    def snapshot(self) -> dict:
        """Full-state view used for replay and no-op equality checks."""
        return {
            "tick": self._tick,
            "next_contract_id": self._next_contract_id,
            "balances": {k.hex(): v for k, v in sorted(self._balances.items())},
            "contracts": {
                cid: (c.payer, c.payee, c.amount, c.condition, c.deadline, c.state)
                for cid, c in sorted(self._contracts.items())
            },
            "events": [event_to_json(e) for e in self._events],
        }


# ---------------------------------------------------------------------------
# JSON-lines event log and replay
# ---------------------------------------------------------------------------

def condition_to_obj(condition: Condition) -> dict:
    if isinstance(condition, HashLock):
        return {"type": "hash_lock", "h2": condition.h2.hex()}
    if isinstance(condition, NotaryHashLock):
        return {
            "type": "notary_hash_lock",
            "h2": condition.h2.hex(),
            "notary": condition.notary.hex(),
            "fee": condition.fee,
        }
    group = condition.group
    return {
        "type": "dlog_lock",
        "c": str(condition.c.value),
        "p": str(group.p),
        "q": str(group.q),
        "g": str(group.g),
    }


def condition_from_obj(obj: dict) -> Condition:
    kind = obj["type"]
    if kind == "hash_lock":
        return HashLock(h2=bytes.fromhex(obj["h2"]))
    if kind == "notary_hash_lock":
        return NotaryHashLock(
            h2=bytes.fromhex(obj["h2"]),
            notary=bytes.fromhex(obj["notary"]),
            fee=int(obj["fee"]),
        )
    if kind == "dlog_lock":
        group = GroupParams(p=int(obj["p"]), q=int(obj["q"]), g=int(obj["g"]))
        return DlogLock(c=GroupElement(int(obj["c"]), group))
    raise ValueError(f"unknown condition type {kind!r}")


def witness_to_obj(witness: Witness) -> dict:
    if isinstance(witness, Preimage):
        return {"type": "preimage", "x": witness.x.hex()}
    if isinstance(witness, PreimageWithNotary):
        return {
            "type": "preimage_with_notary",
            "x": witness.x.hex(),
            "notary_id": witness.notary_id.hex(),
        }
    group = witness.x.params
    return {
        "type": "exponent",
        "x": str(witness.x.value),
        "p": str(group.p),
        "q": str(group.q),
        "g": str(group.g),
    }


def witness_from_obj(obj: dict) -> Witness:
    kind = obj["type"]
    if kind == "preimage":
        return Preimage(x=bytes.fromhex(obj["x"]))
    if kind == "preimage_with_notary":
        return PreimageWithNotary(
            x=bytes.fromhex(obj["x"]),
            notary_id=bytes.fromhex(obj["notary_id"]),
        )
    if kind == "exponent":
        group = GroupParams(p=int(obj["p"]), q=int(obj["q"]), g=int(obj["g"]))
        return Exponent(x=Scalar(int(obj["x"]), group))
    raise ValueError(f"unknown witness type {kind!r}")


def event_to_json(event: LedgerEvent) -> str:
    obj: dict = {"seq": event.seq, "tick": event.tick, "kind": event.kind.value}
    if event.contract_id is not None:
        obj["contract_id"] = event.contract_id
    if event.account is not None:
        obj["account"] = event.account.hex()
    if event.amount is not None:
        obj["amount"] = event.amount
    if event.payer is not None:
        obj["payer"] = event.payer.hex()
    if event.payee is not None:
        obj["payee"] = event.payee.hex()
    if event.deadline is not None:
        obj["deadline"] = event.deadline
    if event.condition is not None:
        obj["condition"] = condition_to_obj(event.condition)
    if event.witness is not None:
        obj["witness"] = witness_to_obj(event.witness)
    if event.payouts:
        obj["payouts"] = [{"to": p.to.hex(), "amount": p.amount} for p in event.payouts]
    return json.dumps(obj, separators=(",", ":"))


def event_from_json(line: str) -> LedgerEvent:
    obj = json.loads(line)
    return LedgerEvent(
        seq=int(obj["seq"]),
        tick=int(obj["tick"]),
        kind=EventKind(obj["kind"]),
        contract_id=obj.get("contract_id"),
        account=bytes.fromhex(obj["account"]) if "account" in obj else None,
        amount=obj.get("amount"),
        payer=bytes.fromhex(obj["payer"]) if "payer" in obj else None,
        payee=bytes.fromhex(obj["payee"]) if "payee" in obj else None,
        deadline=obj.get("deadline"),
        condition=condition_from_obj(obj["condition"]) if "condition" in obj else None,
        witness=witness_from_obj(obj["witness"]) if "witness" in obj else None,
        payouts=tuple(
            Payout(to=bytes.fromhex(p["to"]), amount=int(p["amount"]))
            for p in obj.get("payouts", ())
        ),
    )


def replay(lines: Iterable[str]) -> Ledger:
    """Rebuild a ledger by re-executing a serialized event log.

    The rebuilt ledger's own log is byte-identical to the input, which is
    the strongest form of replay fidelity.
    """
    ledger = Ledger()
    for line in lines:
        event = event_from_json(line)
        if event.kind is EventKind.FUNDED:
            ledger.fund(event.account, event.amount)
        elif event.kind is EventKind.TIME_ADVANCED:
            ledger.advance_time(event.tick - ledger.current_tick)
        elif event.kind is EventKind.CONTRACT_PUBLISHED:
            contract_id = ledger.publish_contract(
                payer=event.payer,
                payee=event.payee,
                amount=event.amount,
                condition=event.condition,
                deadline=event.deadline,
            )
            if contract_id != event.contract_id:
                raise LedgerError("replayed contract id diverged from the log")
        elif event.kind is EventKind.CLAIMED:
            ledger.claim(event.contract_id, event.witness)
        elif event.kind is EventKind.REFUNDED:
            payer = ledger.get_contract(event.contract_id).payer
            ledger.refund(event.contract_id, payer)
    return ledger


def write_event_log(events: Iterable[LedgerEvent], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(event_to_json(event))
            fh.write("\n")
