"""Scenario runner and bounded interleaving explorer.

A World wires one seller, one buyer, and a pre-run notary setup onto a
fresh ledger and an in-process net. Everything that can race is a
scheduling option: message deliveries, the buyer's ledger wake-up, timer
firings, and the placement of expiry itself. The default schedule always
picks the first option (FIFO delivery, expiry last), while the explorer
exhaustively enumerates every ordering up to a depth bound and evaluates
the fairness invariants at every terminal state.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Callable, Iterator, Protocol, Sequence

from . import cert, ledger, protocol, transport
from .cert import PartyId, SellerData, Variant, notarize
from .crypto import GROUPS, GroupParams, SigningKeyPair
from .ledger import EventKind, Ledger, address_for, write_event_log
from .protocol import (
    AbortDecision,
    AbortMessage,
    AbortReason,
    Blind,
    BuyerConfig,
    BuyerPolicy,
    BuyerSession,
    BuyerState,
    ContractRef,
    Offer,
    PublishPlan,
    ScenarioReport,
    SellerPolicy,
    SellerSession,
)

_MAX_RUN_STEPS = 128

NOTARY_ID = b"notary-1"
SELLER_ID = b"seller-1"
BUYER_ID = b"buyer-1"


class ConfigError(Exception):
    pass


class DepthExceeded(Exception):
    pass


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ScenarioConfig:
    variant: Variant
    price: int
    buyer_balance: int
    deadline_offset: int
    notary_fee: int
    group_name: str
    seller_policy: SellerPolicy
    buyer_policy: BuyerPolicy
    seed: int
    payload: bytes

    @property
    def group(self) -> GroupParams:
        return GROUPS[self.group_name]


def make_config(
    variant: Variant | str,
    *,
    price: int = 60,
    buyer_balance: int | None = None,
    deadline_offset: int = 100,
    notary_fee: int | None = None,
    group_name: str = "test",
    seller_policy: SellerPolicy | str = SellerPolicy.HONEST,
    buyer_policy: BuyerPolicy | str = BuyerPolicy.HONEST,
    seed: int = 0,
    payload: bytes | None = None,
    payload_size: int = 32,
) -> ScenarioConfig:
    """Build and validate a scenario configuration.

    Missing payloads are generated deterministically from the seed; the
    notary fee defaults to 10% of the price (rounded down) for the
    notary-split variant and zero otherwise.
    """
    try:
        variant = Variant(variant) if isinstance(variant, str) else variant
        seller_policy = (
            SellerPolicy(seller_policy) if isinstance(seller_policy, str) else seller_policy
        )
        buyer_policy = (
            BuyerPolicy(buyer_policy) if isinstance(buyer_policy, str) else buyer_policy
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if price < 1:
        raise ConfigError("price must be at least 1 token")
    if buyer_balance is None:
        buyer_balance = price
    if buyer_balance < 0:
        raise ConfigError("buyer balance cannot be negative")
    if deadline_offset < 1:
        raise ConfigError("deadline offset must be at least 1 tick")
    if notary_fee is None:
        notary_fee = price // 10 if variant is Variant.V2 else 0
    if variant is Variant.V2 and not 0 < notary_fee < price:
        raise ConfigError("the notary fee must be positive and below the price")
    if variant is Variant.V3 and group_name not in GROUPS:
        raise ConfigError(f"unknown group {group_name!r}; known: {sorted(GROUPS)}")
    if payload is None:
        if payload_size < 1:
            raise ConfigError("payload size must be at least 1 byte")
        payload = _rng(seed, "payload").randbytes(payload_size)
    if not payload:
        raise ConfigError("payload must be nonempty")

    return ScenarioConfig(
        variant=variant,
        price=price,
        buyer_balance=buyer_balance,
        deadline_offset=deadline_offset,
        notary_fee=notary_fee,
        group_name=group_name,
        seller_policy=seller_policy,
        buyer_policy=buyer_policy,
        seed=seed,
        payload=payload,
    )


_CONFIG_KEYS = {
    "variant",
    "price",
    "buyer_balance",
    "deadline_offset",
    "notary_fee",
    "group",
    "seller_policy",
    "buyer_policy",
    "seed",
    "payload_hex",
    "payload_size",
}


def config_from_dict(obj: dict) -> ScenarioConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(obj) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "variant" not in obj:
        raise ConfigError("config requires a 'variant'")
    payload = None
    if "payload_hex" in obj:
        try:
            payload = bytes.fromhex(obj["payload_hex"])
        except ValueError as exc:
            raise ConfigError(f"bad payload_hex: {exc}") from exc
    try:
        return make_config(
            obj["variant"],
            price=int(obj.get("price", 60)),
            buyer_balance=(
                int(obj["buyer_balance"]) if "buyer_balance" in obj else None
            ),
            deadline_offset=int(obj.get("deadline_offset", 100)),
            notary_fee=int(obj["notary_fee"]) if "notary_fee" in obj else None,
            group_name=obj.get("group", "test"),
            seller_policy=obj.get("seller_policy", "honest"),
            buyer_policy=obj.get("buyer_policy", "honest"),
            seed=int(obj.get("seed", 0)),
            payload=payload,
            payload_size=int(obj.get("payload_size", 32)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_from_file(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(obj)


def _rng(seed: int, role: str) -> random.Random:
    # String seeding keeps the per-role streams stable across platforms.
    return random.Random(f"{seed}/{role}")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def emit_report(report: ScenarioReport, fmt: str = "json") -> bytes:
    """Render a report with a stable field order, as JSON or plain text."""
    if fmt == "json":
        obj = {
            "variant": report.variant,
            "seed": report.seed,
            "seller_state": report.seller_state,
            "buyer_state": report.buyer_state,
            "buyer_has_plaintext": report.buyer_has_plaintext,
            "seller_paid": report.seller_paid,
            "notary_paid": report.notary_paid,
            "buyer_refunded": report.buyer_refunded,
            "buyer_decrypt_failed": report.buyer_decrypt_failed,
            "abort_reason": report.abort_reason,
            "balances": {k: report.balances[k] for k in ("buyer", "seller", "notary")},
            "price": report.price,
            "event_count": report.event_count,
            "event_log_path": report.event_log_path,
        }
        return json.dumps(obj, separators=(",", ":")).encode("utf-8")
    if fmt == "text":
        lines = [
            f"scenario: {report.variant}  seed={report.seed}  price={report.price}",
            f"seller: {report.seller_state}  paid={report.seller_paid}",
            (
                f"buyer:  {report.buyer_state}  plaintext={report.buyer_has_plaintext}"
                f"  refunded={report.buyer_refunded}"
            ),
            f"notary: paid={report.notary_paid}",
            "balances: "
            + "  ".join(f"{k}={report.balances[k]}" for k in ("buyer", "seller", "notary")),
            f"events: {report.event_count}",
        ]
        if report.abort_reason:
            lines.insert(4, f"abort reason: {report.abort_reason}")
        if report.buyer_decrypt_failed:
            lines.insert(4, "warning: buyer paid but could not decrypt")
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")


# ---------------------------------------------------------------------------
# The simulated world
# ---------------------------------------------------------------------------

class World:
    """One scenario instance: ledger, net, sessions, and the pending-event set."""

    def __init__(self, config: ScenarioConfig, chain: Ledger | None = None) -> None:
        self.config = config
        self.ledger = chain if chain is not None else Ledger()

        self.notary_keys = SigningKeyPair.generate(_rng(config.seed, "notary-keys"))
        self.notary_id = PartyId(NOTARY_ID, self.notary_keys.public)
        self.seller_id = PartyId(SELLER_ID)
        self.buyer_id = PartyId(BUYER_ID)
        self.seller_addr = address_for(SELLER_ID)
        self.buyer_addr = address_for(BUYER_ID)
        self.notary_addr = address_for(NOTARY_ID)
        self._roles = {SELLER_ID: "seller", BUYER_ID: "buyer", NOTARY_ID: "notary"}
        registry = {NOTARY_ID: self.notary_keys.public}

        group = config.group if config.variant is Variant.V3 else None
        self.package = notarize(
            self.notary_keys,
            self.notary_id,
            SellerData(payload=config.payload, seller=self.seller_id, meta="scenario"),
            config.variant,
            _rng(config.seed, "notary"),
            group=group,
        )
        self.ledger.fund(self.buyer_addr, config.buyer_balance)

        self.seller = SellerSession(
            package=self.package,
            address=self.seller_addr,
            price=config.price,
            policy=config.seller_policy,
            rng=_rng(config.seed, "seller"),
            meta="scenario",
        )
        self.buyer = BuyerSession(
            config=BuyerConfig(
                address=self.buyer_addr,
                seller=self.seller_id,
                price=config.price,
                deadline_offset=config.deadline_offset,
                trusted_notaries=registry,
                variant=config.variant,
                notary_fee=config.notary_fee,
                group=group,
            ),
            policy=config.buyer_policy,
            rng=_rng(config.seed, "buyer"),
        )

        self.net = transport.InProcessNet()
        self._seller_ep = self.net.endpoint(SELLER_ID)
        self._buyer_ep = self.net.endpoint(BUYER_ID)
        self.pending_wakes: list[str] = []
        self.expired = False
        self.trace: list[str] = []
        self._cursor = len(self.ledger.read_events(0))

        offer = self.seller.start()
        self._send(self._seller_ep, BUYER_ID, offer)

    # -- scheduling surface -------------------------------------------------

    def options(self) -> list[str]:
        return [label for label, _ in self._actions()]

    def step(self, index: int) -> str:
        actions = self._actions()
        if not 0 <= index < len(actions):
            raise IndexError(f"schedule index {index} out of range ({len(actions)} options)")
        label, action = actions[index]
        action()
        self.trace.append(label)
        self._scan_chain()
        return label

    def _actions(self) -> list[tuple[str, Callable[[], None]]]:
        actions: list[tuple[str, Callable[[], None]]] = []
        for i, env in enumerate(self.net.pending):
            label = (
                f"deliver:{env.body['type']}:"
                f"{self._roles[env.sender]}->{self._roles[env.recipient]}"
            )
            actions.append((label, lambda i=i: self._deliver(i)))
        for j, wake in enumerate(self.pending_wakes):
            actions.append((wake, lambda j=j: self._fire_wake(j)))
        if not self.expired and self.ledger.open_contracts():
            actions.append(("expire", self._expire))
        return actions

    # -- action execution ---------------------------------------------------

    def _send(self, endpoint, to: bytes, message: protocol.ProtocolMessage) -> None:
        endpoint.send(to, protocol.message_to_obj(message))

    def _deliver(self, index: int) -> None:
        envelope = self.net.deliver(index)
        endpoint = self._buyer_ep if envelope.recipient == BUYER_ID else self._seller_ep
        received = endpoint.recv()
        message = protocol.message_from_obj(received.body)
        if received.recipient == BUYER_ID:
            self._handle_buyer_message(message)
        else:
            self._handle_seller_message(message)

    def _fire_wake(self, index: int) -> None:
        wake = self.pending_wakes.pop(index)
        if wake == "notify:buyer":
            self._wake_buyer(process_claims=True)
        elif wake == "timers":
            self._wake_buyer(process_claims=False)
            self.seller.on_timer(self.ledger.current_tick)
        else:
            raise AssertionError(f"unknown wake {wake!r}")

    def _expire(self) -> None:
        opens = self.ledger.open_contracts()
        target = max(c.deadline for c in opens) + 1
        self.ledger.advance_time(target - self.ledger.current_tick)
        self.expired = True
        self.pending_wakes.append("timers")

    def _wake_buyer(self, process_claims: bool) -> None:
        now = self.ledger.current_tick
        refund_id = self.buyer.check_timeout(now, self.ledger)
        if refund_id is not None:
            try:
                self.ledger.refund(refund_id, self.buyer_addr)
                self.buyer.note_refunded()
            except ledger.LedgerError:
                pass
        if process_claims and self.buyer.contract_id is not None:
            for event in self.ledger.read_events(0):
                if (
                    event.kind is EventKind.CLAIMED
                    and event.contract_id == self.buyer.contract_id
                ):
                    self.buyer.on_claim(event)
                    break

    def _scan_chain(self) -> None:
        events = self.ledger.read_events(self._cursor)
        self._cursor += len(events)
        for event in events:
            if (
                event.kind is EventKind.CLAIMED
                and event.contract_id == self.buyer.contract_id
            ):
                self.pending_wakes.append("notify:buyer")

    # -- message handling ---------------------------------------------------

    def _handle_buyer_message(self, message: protocol.ProtocolMessage) -> None:
        if not isinstance(message, Offer):
            return
        now = self.ledger.current_tick
        decision = self.buyer.on_offer(message, now)
        if isinstance(decision, AbortDecision):
            self._send(self._buyer_ep, SELLER_ID, AbortMessage(decision.reason.value))
            return
        if not isinstance(decision, PublishPlan):
            return
        if decision.blind is not None:
            self._send(self._buyer_ep, SELLER_ID, Blind(decision.blind))
        try:
            contract_id = self.ledger.publish_contract(
                payer=self.buyer_addr,
                payee=decision.payee,
                amount=decision.amount,
                condition=decision.condition,
                deadline=decision.deadline,
            )
        except ledger.InsufficientFunds:
            self.buyer.note_publish_failed(AbortReason.INSUFFICIENT_FUNDS)
            self._send(
                self._buyer_ep, SELLER_ID, AbortMessage(AbortReason.INSUFFICIENT_FUNDS.value)
            )
            return
        self.buyer.note_contract(contract_id)
        self._send(self._buyer_ep, SELLER_ID, ContractRef(contract_id))

    def _handle_seller_message(self, message: protocol.ProtocolMessage) -> None:
        now = self.ledger.current_tick
        if isinstance(message, ContractRef):
            try:
                contract = self.ledger.get_contract(message.contract_id)
            except ledger.UnknownContract:
                return
            self._submit_claim(self.seller.on_contract(contract, now))
        elif isinstance(message, Blind):
            self._submit_claim(self.seller.on_blind(message.r, now))
        elif isinstance(message, AbortMessage):
            self.seller.on_abort(message.reason)

    def _submit_claim(self, request: protocol.ClaimRequest | None) -> None:
        if request is None:
            return
        try:
            self.ledger.claim(request.contract_id, request.witness)
            self.seller.note_claimed()
        except ledger.LedgerError as exc:
            self.seller.note_claim_failed(str(exc))

    # -- reporting ------------------------------------------------------------

    def report(self, log_path: str | None = None) -> ScenarioReport:
        events = self.ledger.read_events(0)
        buyer_contracts = {
            e.contract_id
            for e in events
            if e.kind is EventKind.CONTRACT_PUBLISHED and e.payer == self.buyer_addr
        }
        seller_paid = any(
            e.kind is EventKind.CLAIMED
            and any(p.to == self.seller_addr and p.amount > 0 for p in e.payouts)
            for e in events
        )
        notary_paid = any(
            e.kind is EventKind.CLAIMED
            and any(p.to == self.notary_addr and p.amount > 0 for p in e.payouts)
            for e in events
        )
        buyer_refunded = any(
            e.kind is EventKind.REFUNDED and e.contract_id in buyer_contracts
            for e in events
        )
        return ScenarioReport(
            variant=self.config.variant.value,
            seed=self.config.seed,
            seller_state=self.seller.state.value,
            buyer_state=self.buyer.state.value,
            buyer_has_plaintext=self.buyer.state is BuyerState.SETTLED,
            seller_paid=seller_paid,
            notary_paid=notary_paid,
            buyer_refunded=buyer_refunded,
            buyer_decrypt_failed=self.buyer.decrypt_failed,
            abort_reason=(
                self.buyer.abort_reason.value if self.buyer.abort_reason else None
            ),
            balances={
                "buyer": self.ledger.get_balance(self.buyer_addr),
                "seller": self.ledger.get_balance(self.seller_addr),
                "notary": self.ledger.get_balance(self.notary_addr),
            },
            price=self.config.price,
            event_count=len(events),
            event_log_path=log_path,
        )


# ---------------------------------------------------------------------------
# Driving and exploring
# ---------------------------------------------------------------------------

class Simulation(Protocol):
    """Anything the schedule enumerator can drive."""

    def options(self) -> Sequence[str]: ...

    def step(self, index: int) -> object: ...


def drive(
    sim: Simulation,
    schedule: Sequence[int] = (),
    observer: Callable[[str], None] | None = None,
    max_steps: int = _MAX_RUN_STEPS,
) -> list[int]:
    """Run to quiescence, following the schedule then always choosing 0."""
    taken: list[int] = []
    while True:
        labels = sim.options()
        if not labels:
            return taken
        if len(taken) >= max_steps:
            raise DepthExceeded(f"run exceeded {max_steps} scheduling choices")
        index = schedule[len(taken)] if len(taken) < len(schedule) else 0
        label = labels[index]
        sim.step(index)
        taken.append(index)
        if observer is not None:
            observer(label)


def enumerate_schedules(
    make_sim: Callable[[], Simulation],
    depth: int,
) -> Iterator[tuple[Simulation, tuple[int, ...]]]:
    """Yield every complete schedule exactly once (depth-first, deterministic).

    Each yielded simulation has been run to quiescence along its schedule.
    Raises DepthExceeded if any run needs more choices than the bound.
    """
    stack: list[tuple[int, ...]] = [()]
    while stack:
        prefix = stack.pop()
        sim = make_sim()
        counts: list[int] = []
        schedule: list[int] = []
        while True:
            opts = sim.options()
            if not opts:
                break
            if len(counts) >= depth:
                raise DepthExceeded(f"a run exceeded the depth bound of {depth}")
            index = prefix[len(counts)] if len(counts) < len(prefix) else 0
            counts.append(len(opts))
            schedule.append(index)
            sim.step(index)
        for pos in range(len(prefix), len(counts)):
            for alt in range(1, counts[pos]):
                stack.append(tuple(schedule[:pos]) + (alt,))
        yield sim, tuple(schedule)


def run_scenario(
    config: ScenarioConfig,
    schedule: Sequence[int] = (),
    log_path: str | None = None,
    observer: Callable[[str], None] | None = None,
    chain: Ledger | None = None,
) -> ScenarioReport:
    """Run one scenario to quiescence; deterministic given the config's seed."""
    world = World(config, chain)
    drive(world, schedule, observer)
    if log_path is not None:
        write_event_log(world.ledger.read_events(0), log_path)
    return world.report(log_path)


def simulate(config: ScenarioConfig, schedule: Sequence[int] = ()) -> World:
    """Like run_scenario but hands back the whole world for inspection."""
    world = World(config, None)
    drive(world, schedule)
    return world


@dataclass(frozen=True)
class Violation:
    schedule: tuple[str, ...]
    prop: str
    detail: str


@dataclass
class ExplorationResult:
    schedules_explored: int
    violations: list[Violation] = field(default_factory=list)
    max_depth: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def fairness_violations(world: World) -> list[tuple[str, str]]:
    """Evaluate the exchange invariants at one terminal state."""
    report = world.report()
    config = world.config
    events = world.ledger.read_events(0)
    out: list[tuple[str, str]] = []

    if report.buyer_has_plaintext != report.seller_paid:
        out.append(
            (
                "atomicity",
                f"buyer_has_plaintext={report.buyer_has_plaintext} but "
                f"seller_paid={report.seller_paid}",
            )
        )
    if config.variant is Variant.V2 and report.notary_paid != report.seller_paid:
        out.append(
            (
                "notary-split",
                f"notary_paid={report.notary_paid} but seller_paid={report.seller_paid}",
            )
        )

    if config.buyer_policy is BuyerPolicy.HONEST:
        balance = report.balances["buyer"]
        expected = (
            config.buyer_balance - config.price
            if report.buyer_has_plaintext
            else config.buyer_balance
        )
        if balance != expected:
            out.append(
                (
                    "honest-buyer-no-loss",
                    f"buyer balance {balance}, expected {expected} "
                    f"(plaintext={report.buyer_has_plaintext})",
                )
            )

    if config.seller_policy is SellerPolicy.HONEST:
        amounts = {
            e.contract_id: e.amount
            for e in events
            if e.kind is EventKind.CONTRACT_PUBLISHED
        }
        for e in events:
            if e.kind is EventKind.CLAIMED and any(
                p.to == world.seller_addr for p in e.payouts
            ):
                if amounts.get(e.contract_id) != config.price:
                    out.append(
                        (
                            "honest-seller-no-loss",
                            f"seller claimed contract {e.contract_id} worth "
                            f"{amounts.get(e.contract_id)} != price {config.price}",
                        )
                    )

    if world.buyer.state is BuyerState.ABORTED:
        published = [
            e
            for e in events
            if e.kind is EventKind.CONTRACT_PUBLISHED and e.payer == world.buyer_addr
        ]
        if published:
            out.append(
                ("abort-before-pay", f"aborted buyer published {len(published)} contract(s)")
            )

    funded = sum(e.amount for e in events if e.kind is EventKind.FUNDED)
    snapshot = world.ledger.snapshot()
    total = sum(snapshot["balances"].values()) + sum(
        c.amount for c in world.ledger.open_contracts()
    )
    if total != funded:
        out.append(("conservation", f"balances+escrow {total} != funded {funded}"))

    settlements: dict[int, int] = {}
    for e in events:
        if e.kind in (EventKind.CLAIMED, EventKind.REFUNDED):
            settlements[e.contract_id] = settlements.get(e.contract_id, 0) + 1
    for cid, count in settlements.items():
        if count > 1:
            out.append(("single-settlement", f"contract {cid} settled {count} times"))

    return out


def explore(
    config: ScenarioConfig,
    depth: int = 12,
    chain_factory: Callable[[], Ledger] | None = None,
) -> ExplorationResult:
    """Exhaustively explore delivery orderings and expiry placement.

    Returns every invariant violation with the schedule that produced it;
    an empty violation list means every terminal state was fair.
    """
    result = ExplorationResult(schedules_explored=0)

    def factory() -> World:
        return World(config, chain_factory() if chain_factory else None)

    for world, schedule in enumerate_schedules(factory, depth):
        result.schedules_explored += 1
        result.max_depth = max(result.max_depth, len(schedule))
        for prop, detail in fairness_violations(world):
            result.violations.append(
                Violation(schedule=tuple(world.trace), prop=prop, detail=detail)
            )
    return result


# ---------------------------------------------------------------------------
# Built-in demo walkthrough
# ---------------------------------------------------------------------------

_DEMO_NARRATIVE = {
    "deliver:offer:seller->buyer": (
        "seller -> buyer: offer (signature, ciphertext, key commitment); "
        "buyer verifies and escrows the price"
    ),
    "deliver:blind:buyer->seller": "buyer -> seller: fresh blinding scalar",
    "deliver:contract_ref:buyer->seller": (
        "buyer -> seller: escrow contract reference; seller checks terms and claims"
    ),
    "notify:buyer": "buyer reads the published witness, recovers the key, decrypts",
    "timers": "timers fire: refund if still open, mark the exchange lapsed",
    "expire": "deadline passes",
}


def demo_config(variant: Variant | str) -> ScenarioConfig:
    """The built-in happy-path configuration used by `sedg demo`."""
    variant = Variant(variant) if isinstance(variant, str) else variant
    if variant is Variant.V2:
        return make_config(variant, price=100, buyer_balance=150, notary_fee=10, seed=7)
    if variant is Variant.V3:
        return make_config(variant, price=60, buyer_balance=100, group_name="modp2048", seed=7)
    return make_config(variant, price=60, buyer_balance=100, seed=7)


def demo(variant: Variant | str, printer: Callable[[str], None] = print) -> ScenarioReport:
    """Happy-path walkthrough of one variant, narrating each step."""
    variant = Variant(variant) if isinstance(variant, str) else variant
    config = demo_config(variant)

    names = {Variant.V1: "hash lock", Variant.V2: "notary-split lock", Variant.V3: "blinded dlog lock"}
    printer(f"== {variant.value} exchange ({names[variant]}) ==")
    printer(
        f"setup: notary validated {len(config.payload)} payload bytes, encrypted them, "
        "and signed the commitments"
    )

    world = World(config)
    h2 = world.package.certificate.h2
    h2_desc = (
        f"g^k = {h2.element.value.to_bytes(h2.element.params.element_len(), 'big').hex()[:16]}…"
        if isinstance(h2, cert.GroupPower)
        else f"digest {h2.digest.hex()[:16]}…"
    )
    printer(f"setup: h1 = {world.package.certificate.h1.hex()[:16]}…, h2 = {h2_desc}")
    printer(f"setup: buyer funded with {config.buyer_balance} tokens")

    def narrate(label: str) -> None:
        printer(f"step: {_DEMO_NARRATIVE.get(label, label)}")

    drive(world, observer=narrate)
    report = world.report()
    printer(
        "result: balances "
        + "  ".join(f"{k}={v}" for k, v in report.balances.items())
    )
    printer(
        f"result: buyer decrypted payload matches the original: "
        f"{world.buyer.plaintext == config.payload}"
    )
    return report
