from __future__ import annotations

import random

import pytest

from helpers import ScriptedRng
from sedg import crypto
from sedg.cert import (
    Certificate,
    CertificatePackage,
    GroupPower,
    HashOfKey,
    PartyId,
    SellerData,
    Variant,
    notarize,
    signing_payload,
)
from sedg.crypto import TEST_GROUP, Scalar, SigningKeyPair, scalar_draw_len
from sedg.ledger import (
    ContractState,
    DlogLock,
    HashLock,
    Ledger,
    NotaryHashLock,
    Preimage,
    PreimageWithNotary,
    Exponent,
    WrongWitness,
    address_for,
)
from sedg.protocol import (
    AbortDecision,
    AbortMessage,
    AbortReason,
    Blind,
    BuyerConfig,
    BuyerPolicy,
    BuyerSession,
    BuyerState,
    ContractMismatch,
    ContractRef,
    Offer,
    PublishPlan,
    SellerPolicy,
    SellerSession,
    SellerState,
    message_from_obj,
    message_to_obj,
)

NOTARY_KEYS = SigningKeyPair.generate(random.Random(1))
NOTARY = PartyId(b"notary-1", NOTARY_KEYS.public)
SELLER = PartyId(b"seller-1")
REGISTRY = {NOTARY.id: NOTARY_KEYS.public}
SELLER_ADDR = address_for(SELLER.id)
BUYER_ADDR = address_for(b"buyer-1")
PAYLOAD = b"the goods"
PRICE = 60


def make_package(variant, *, k=None, payload=PAYLOAD):
    if k is not None:
        rng = ScriptedRng([k.to_bytes(32, "big"), bytes(12)])
    else:
        rng = random.Random(2)
    group = TEST_GROUP if variant is Variant.V3 else None
    return notarize(
        NOTARY_KEYS,
        NOTARY,
        SellerData(payload=payload, seller=SELLER),
        variant,
        rng,
        group=group,
    )


def make_seller(variant, policy=SellerPolicy.HONEST, *, k=None, price=PRICE):
    package = make_package(variant, k=k)
    return SellerSession(package, SELLER_ADDR, price, policy, random.Random(3))


def make_buyer(variant, policy=BuyerPolicy.HONEST, *, r=None, price=PRICE, fee=10):
    rng: random.Random
    if r is not None:
        # raw % (q-1) + 1 == r  <=>  raw == r-1 for r-1 < q-1
        rng = ScriptedRng([(r - 1).to_bytes(scalar_draw_len(TEST_GROUP), "big")])
    else:
        rng = random.Random(4)
    return BuyerSession(
        BuyerConfig(
            address=BUYER_ADDR,
            seller=SELLER,
            price=price,
            deadline_offset=100,
            trusted_notaries=REGISTRY,
            variant=variant,
            notary_fee=fee if variant is Variant.V2 else 0,
            group=TEST_GROUP if variant is Variant.V3 else None,
        ),
        policy,
        rng,
    )


# ---------------------------------------------------------------------------
# Offers
# ---------------------------------------------------------------------------

def test_honest_offer_passes_buyer_verification():
    seller = make_seller(Variant.V1)
    buyer = make_buyer(Variant.V1)
    offer = seller.start()
    assert seller.state is SellerState.OFFER_SENT
    plan = buyer.on_offer(offer, now=0)
    assert isinstance(plan, PublishPlan)
    assert plan.condition == HashLock(h2=offer.h2.digest)
    assert plan.amount == PRICE
    assert plan.deadline == 100
    assert plan.payee == SELLER_ADDR
    assert buyer.state is BuyerState.VERIFIED


def test_corrupt_ciphertext_offer_aborts_with_mismatch():
    seller = make_seller(Variant.V1, SellerPolicy.SEND_CORRUPT_CIPHERTEXT)
    buyer = make_buyer(Variant.V1)
    decision = buyer.on_offer(seller.start(), now=0)
    assert isinstance(decision, AbortDecision)
    assert decision.reason is AbortReason.CIPHERTEXT_MISMATCH
    assert buyer.state is BuyerState.ABORTED


def test_mismatched_h2_offer_aborts_with_bad_signature():
    for variant in (Variant.V1, Variant.V2, Variant.V3):
        seller = make_seller(variant, SellerPolicy.SEND_MISMATCHED_H2)
        buyer = make_buyer(variant)
        decision = buyer.on_offer(seller.start(), now=0)
        assert isinstance(decision, AbortDecision)
        assert decision.reason is AbortReason.BAD_SIGNATURE


def test_honest_v3_offer_carries_group_parameters():
    seller = make_seller(Variant.V3)
    offer = seller.start()
    assert isinstance(offer.h2, GroupPower)
    assert offer.h2.element.params == TEST_GROUP


def test_price_mismatch_aborts():
    seller = make_seller(Variant.V1, price=PRICE + 1)
    buyer = make_buyer(Variant.V1)
    decision = buyer.on_offer(seller.start(), now=0)
    assert decision.reason is AbortReason.PRICE_MISMATCH


def test_variant_mismatch_aborts():
    seller = make_seller(Variant.V2)
    buyer = make_buyer(Variant.V1)
    decision = buyer.on_offer(seller.start(), now=0)
    assert decision.reason is AbortReason.VARIANT_MISMATCH


def test_buyer_rejects_variant_downgrade():
    import dataclasses

    # An offer whose variant field claims the dlog flavour but whose
    # commitment is a plain hash must not downgrade the session.
    honest = make_seller(Variant.V1).start()
    lying = dataclasses.replace(honest, variant=Variant.V3)
    buyer = make_buyer(Variant.V3)
    decision = buyer.on_offer(lying, now=0)
    assert decision.reason is AbortReason.VARIANT_MISMATCH


def test_buyer_rejects_unexpected_group_parameters():
    # A validly signed offer over a group the buyer is not configured for.
    from sedg.crypto import MODP_2048

    package = notarize(
        NOTARY_KEYS,
        NOTARY,
        SellerData(payload=PAYLOAD, seller=SELLER),
        Variant.V3,
        random.Random(77),
        group=MODP_2048,
    )
    seller = SellerSession(package, SELLER_ADDR, PRICE, SellerPolicy.HONEST, random.Random(3))
    buyer = make_buyer(Variant.V3)  # configured for the test group
    decision = buyer.on_offer(seller.start(), now=0)
    assert decision.reason is AbortReason.GROUP_MISMATCH


def test_seller_declines_blind_from_wrong_group():
    from sedg.crypto import MODP_2048

    seller = make_seller(Variant.V3, k=3)
    c = crypto.group_exp(TEST_GROUP, seller.package.certificate.h2.element, 4)
    _, contract = _open_contract(DlogLock(c))
    with pytest.raises(ContractMismatch):
        seller.build_witness(contract, blind=Scalar(4, MODP_2048))


def test_v3_buyer_blinds_the_commitment():
    # h2 = g^3 = 8 and forced r = 4 gives c = 8^4 mod 23 = 2.
    seller = make_seller(Variant.V3, k=3)
    buyer = make_buyer(Variant.V3, r=4)
    plan = buyer.on_offer(seller.start(), now=0)
    assert isinstance(plan, PublishPlan)
    assert plan.blind.value == 4
    assert isinstance(plan.condition, DlogLock)
    assert plan.condition.c.value == 2
    assert buyer.state is BuyerState.BLINDED


def test_never_publish_policy_stops_after_verification():
    seller = make_seller(Variant.V1)
    buyer = make_buyer(Variant.V1, BuyerPolicy.NEVER_PUBLISH_CONTRACT)
    assert buyer.on_offer(seller.start(), now=0) is None
    assert buyer.state is BuyerState.VERIFIED


def test_underpriced_policy_halves_the_amount():
    seller = make_seller(Variant.V1)
    buyer = make_buyer(Variant.V1, BuyerPolicy.PUBLISH_UNDERPRICED_CONTRACT)
    plan = buyer.on_offer(seller.start(), now=0)
    assert plan.amount == PRICE // 2


# ---------------------------------------------------------------------------
# Witness construction
# ---------------------------------------------------------------------------

def _open_contract(condition, amount=PRICE, payee=SELLER_ADDR, deadline=100):
    chain = Ledger()
    chain.fund(BUYER_ADDR, 200)
    cid = chain.publish_contract(BUYER_ADDR, payee, amount, condition, deadline)
    return chain, chain.get_contract(cid)


def test_build_witness_v1():
    seller = make_seller(Variant.V1)
    h2 = seller.package.certificate.h2.digest
    chain, contract = _open_contract(HashLock(h2))
    witness = seller.build_witness(contract)
    assert witness == Preimage(seller.package.key)
    assert crypto.sha256(witness.x) == h2
    chain.claim(contract.id, witness)


def test_build_witness_v2():
    seller = make_seller(Variant.V2)
    h2 = seller.package.certificate.h2.digest
    chain, contract = _open_contract(
        NotaryHashLock(h2=h2, notary=address_for(NOTARY.id), fee=10)
    )
    witness = seller.build_witness(contract)
    assert witness == PreimageWithNotary(seller.package.key, NOTARY.id)
    chain.claim(contract.id, witness)


def test_build_witness_v3_forced_values():
    # scalar(k)=3, r=4: witness exponent is 12 mod 11 = 1.
    seller = make_seller(Variant.V3, k=3)
    c = crypto.group_exp(TEST_GROUP, seller.package.certificate.h2.element, 4)
    chain, contract = _open_contract(DlogLock(c))
    witness = seller.build_witness(contract, blind=Scalar(4, TEST_GROUP))
    assert witness.x.value == 1
    chain.claim(contract.id, witness)


def test_build_witness_rejects_underpayment():
    seller = make_seller(Variant.V1)
    h2 = seller.package.certificate.h2.digest
    _, contract = _open_contract(HashLock(h2), amount=PRICE - 1)
    with pytest.raises(ContractMismatch):
        seller.build_witness(contract)


def test_build_witness_rejects_wrong_payee():
    seller = make_seller(Variant.V1)
    h2 = seller.package.certificate.h2.digest
    _, contract = _open_contract(HashLock(h2), payee=address_for(b"mallory"))
    with pytest.raises(ContractMismatch):
        seller.build_witness(contract)


def test_build_witness_rejects_foreign_commitment():
    seller = make_seller(Variant.V1)
    _, contract = _open_contract(HashLock(crypto.sha256(b"not ours")))
    with pytest.raises(ContractMismatch):
        seller.build_witness(contract)


def test_build_witness_rejects_misblinded_condition():
    seller = make_seller(Variant.V3, k=3)
    wrong_c = crypto.group_exp(TEST_GROUP, TEST_GROUP.g, 7)
    _, contract = _open_contract(DlogLock(wrong_c))
    with pytest.raises(ContractMismatch):
        seller.build_witness(contract, blind=Scalar(4, TEST_GROUP))


def test_seller_claims_once_at_most():
    seller = make_seller(Variant.V1)
    h2 = seller.package.certificate.h2.digest
    _, contract = _open_contract(HashLock(h2))
    first = seller.on_contract(contract, now=0)
    assert first is not None
    assert seller.on_contract(contract, now=0) is None


def test_withhold_key_policy_never_claims():
    seller = make_seller(Variant.V1, SellerPolicy.WITHHOLD_KEY)
    h2 = seller.package.certificate.h2.digest
    _, contract = _open_contract(HashLock(h2))
    assert seller.on_contract(contract, now=0) is None


def test_wrong_witness_policy_is_rejected_by_the_chain():
    seller = make_seller(Variant.V1, SellerPolicy.CLAIM_WRONG_WITNESS)
    h2 = seller.package.certificate.h2.digest
    chain, contract = _open_contract(HashLock(h2))
    request = seller.on_contract(contract, now=0)
    assert request is not None
    before = chain.snapshot()
    with pytest.raises(WrongWitness):
        chain.claim(request.contract_id, request.witness)
    assert chain.snapshot() == before
    assert chain.get_contract(contract.id).state is ContractState.OPEN


# ---------------------------------------------------------------------------
# Key recovery and timeouts
# ---------------------------------------------------------------------------

def _settled_exchange(variant, *, k=None, r=None):
    seller = make_seller(variant, k=k)
    buyer = make_buyer(variant, r=r)
    offer = seller.start()
    plan = buyer.on_offer(offer, now=0)
    chain = Ledger()
    chain.fund(BUYER_ADDR, 200)
    cid = chain.publish_contract(
        BUYER_ADDR, plan.payee, plan.amount, plan.condition, plan.deadline
    )
    buyer.note_contract(cid)
    if plan.blind is not None:
        seller.on_blind(plan.blind, now=0)
    request = seller.on_contract(chain.get_contract(cid), now=0)
    event = chain.claim(request.contract_id, request.witness)
    return seller, buyer, chain, event


def test_buyer_recovers_plaintext_v1():
    _, buyer, _, event = _settled_exchange(Variant.V1)
    assert buyer.on_claim(event) == PAYLOAD
    assert buyer.state is BuyerState.SETTLED


def test_buyer_recovers_plaintext_v2():
    _, buyer, _, event = _settled_exchange(Variant.V2)
    assert buyer.on_claim(event) == PAYLOAD


def test_buyer_recovers_scalar_key_v3():
    # witness x = 1, r = 4: k = x * r^-1 = 1 * 3 = 3, the original exponent.
    _, buyer, _, event = _settled_exchange(Variant.V3, k=3, r=4)
    assert event.witness.x.value == 1
    assert buyer.on_claim(event) == PAYLOAD
    recovered = crypto.scalar_mul(event.witness.x, crypto.scalar_inv(buyer.blind))
    assert recovered.value == 3


def test_check_timeout_boundaries():
    seller = make_seller(Variant.V1)
    buyer = make_buyer(Variant.V1)
    plan = buyer.on_offer(seller.start(), now=0)
    chain = Ledger()
    chain.fund(BUYER_ADDR, 200)
    cid = chain.publish_contract(
        BUYER_ADDR, plan.payee, plan.amount, plan.condition, plan.deadline
    )
    buyer.note_contract(cid)
    assert buyer.check_timeout(0, chain) is None
    chain.advance_time(plan.deadline)
    assert buyer.check_timeout(chain.current_tick, chain) is None  # exactly at deadline
    chain.advance_time(1)
    assert buyer.check_timeout(chain.current_tick, chain) == cid
    chain.refund(cid, BUYER_ADDR)
    buyer.note_refunded()
    assert buyer.state is BuyerState.REFUNDED
    assert buyer.check_timeout(chain.current_tick, chain) is None


def test_eager_refund_policy_fires_before_expiry():
    seller = make_seller(Variant.V1)
    buyer = make_buyer(Variant.V1, BuyerPolicy.REFUND_EAGERLY)
    plan = buyer.on_offer(seller.start(), now=0)
    chain = Ledger()
    chain.fund(BUYER_ADDR, 200)
    cid = chain.publish_contract(
        BUYER_ADDR, plan.payee, plan.amount, plan.condition, plan.deadline
    )
    buyer.note_contract(cid)
    assert buyer.check_timeout(0, chain) == cid  # the ledger will say NotExpired


def test_check_timeout_ignores_settled_contracts():
    _, buyer, chain, event = _settled_exchange(Variant.V1)
    buyer.on_claim(event)
    chain.advance_time(500)
    assert buyer.check_timeout(chain.current_tick, chain) is None


def test_decrypt_failure_marks_session_without_settling():
    # A dishonest notary commits to one key but encrypts under another; the
    # ledger still pays the seller, and the buyer is left with noise.
    rng = random.Random(9)
    committed, actual, nonce = rng.randbytes(32), rng.randbytes(32), rng.randbytes(12)
    ciphertext = crypto.encrypt(actual, PAYLOAD, nonce)
    h1 = crypto.sha256(ciphertext.encoded())
    h2 = HashOfKey(crypto.sha256(committed))
    sigma = crypto.sign(NOTARY_KEYS.seed, signing_payload(Variant.V1, h1, h2, SELLER))
    package = CertificatePackage(
        key=committed,
        ciphertext=ciphertext,
        certificate=Certificate(h1, h2, SELLER, NOTARY, sigma),
    )
    seller = SellerSession(package, SELLER_ADDR, PRICE, SellerPolicy.HONEST, random.Random(3))
    buyer = make_buyer(Variant.V1)
    plan = buyer.on_offer(seller.start(), now=0)
    assert isinstance(plan, PublishPlan)  # the certificate itself verifies
    chain = Ledger()
    chain.fund(BUYER_ADDR, 200)
    cid = chain.publish_contract(
        BUYER_ADDR, plan.payee, plan.amount, plan.condition, plan.deadline
    )
    buyer.note_contract(cid)
    request = seller.on_contract(chain.get_contract(cid), now=0)
    event = chain.claim(request.contract_id, request.witness)
    assert buyer.on_claim(event) is None
    assert buyer.decrypt_failed
    assert buyer.state is not BuyerState.SETTLED


# ---------------------------------------------------------------------------
# Message serialization
# ---------------------------------------------------------------------------

def test_offer_json_round_trip_all_variants():
    for variant in Variant:
        offer = make_seller(variant).start()
        recovered = message_from_obj(message_to_obj(offer))
        assert isinstance(recovered, Offer)
        assert recovered.variant == offer.variant
        assert recovered.sigma == offer.sigma
        assert recovered.ciphertext == offer.ciphertext
        assert recovered.h1 == offer.h1
        assert recovered.h2 == offer.h2
        assert recovered.seller_id.id == offer.seller_id.id
        assert recovered.price == offer.price


def test_small_message_json_round_trips():
    blind = Blind(r=Scalar(4, TEST_GROUP))
    assert message_from_obj(message_to_obj(blind)) == blind
    ref = ContractRef(contract_id=7)
    assert message_from_obj(message_to_obj(ref)) == ref
    abort = AbortMessage(reason="price_mismatch")
    assert message_from_obj(message_to_obj(abort)) == abort
    with pytest.raises(ValueError):
        message_from_obj({"type": "mystery"})
