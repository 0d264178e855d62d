"""Notary setup phase and certificate verification.

The notary validates seller data, encrypts it under a fresh key, commits to
ciphertext and key, signs the commitments together with the seller identity,
and hands the whole package to the seller. Buyers later verify such
certificates against a static registry of trusted notary keys.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Union

from . import crypto
from .crypto import Ciphertext, GroupElement, GroupParams, SigningKeyPair


class Variant(Enum):
    """The three exchange flavours: hash lock, notary-split lock, dlog lock."""

    V1 = "v1"
    V2 = "v2"
    V3 = "v3"


class ValidationRejected(Exception):
    """The notary's data validation predicate refused the payload."""


@dataclass(frozen=True)
class PartyId:
    """Opaque identity handle; the public key is set for parties that sign."""

    id: bytes
    public_key: bytes | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("party id must be nonempty")
        if len(self.id) > 64:
            raise ValueError("party id longer than 64 bytes")


@dataclass(frozen=True)
class SellerData:
    """Raw payload offered for sale, plus the seller identity and free-form meta.

    An empty payload is representable so the validation predicate can reject it.
    """

    payload: bytes
    seller: PartyId
    meta: str = ""


# ---------------------------------------------------------------------------
# Key commitments (the three h2 constructions)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HashOfKey:
    """Digest of the key alone (hash-lock variant)."""

    digest: bytes


@dataclass(frozen=True)
class HashOfKeyAndNotary:
    """Digest binding key and notary identity, enabling the atomic fee split."""

    digest: bytes


@dataclass(frozen=True)
class GroupPower:
    """Subgroup element g^k, blindable by the buyer."""

    element: GroupElement


Commitment2 = Union[HashOfKey, HashOfKeyAndNotary, GroupPower]

_COMMITMENT_VARIANT = {
    HashOfKey: Variant.V1,
    HashOfKeyAndNotary: Variant.V2,
    GroupPower: Variant.V3,
}


def commitment_variant(h2: Commitment2) -> Variant:
    return _COMMITMENT_VARIANT[type(h2)]


def encode_commitment(h2: Commitment2) -> bytes:
    """Canonical byte form of a commitment, as included in the signed string."""
    if isinstance(h2, GroupPower):
        return h2.element.encoded()
    return h2.digest


def commitment_opens(h2: Commitment2, key: bytes, notary_id: bytes | None = None) -> bool:
    """Whether the key opens the commitment (per variant)."""
    if isinstance(h2, HashOfKey):
        return crypto.sha256(key) == h2.digest
    if isinstance(h2, HashOfKeyAndNotary):
        if notary_id is None:
            return False
        return crypto.sha256(crypto.canonical_encode([key, notary_id])) == h2.digest
    exponent = crypto.scalar_from_key(key, h2.element.params)
    if exponent is None:
        return False
    return crypto.group_exp(h2.element.params, h2.element.params.g, exponent) == h2.element


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    """The notary's signed commitments over one seller payload."""

    h1: bytes
    h2: Commitment2
    seller_id: PartyId
    notary_id: PartyId
    sigma: bytes
    group: GroupParams | None = None

    @property
    def variant(self) -> Variant:
        return commitment_variant(self.h2)


@dataclass(frozen=True)
class CertificatePackage:
    """What the notary hands the seller: secret key, ciphertext, certificate."""

    key: bytes
    ciphertext: Ciphertext
    certificate: Certificate


def signing_payload(variant: Variant, h1: bytes, h2: Commitment2, seller_id: PartyId) -> bytes:
    """The exact byte string the notary signs.

    The variant tag keeps a certificate issued for one flavour from being
    replayed under another.
    """
    return crypto.canonical_encode(
        [variant.value.encode("ascii"), h1, encode_commitment(h2), seller_id.id]
    )


def package_is_consistent(package: CertificatePackage) -> bool:
    """Internal consistency: h1 binds the ciphertext and the key opens h2."""
    cert = package.certificate
    if crypto.sha256(package.ciphertext.encoded()) != cert.h1:
        return False
    return commitment_opens(cert.h2, package.key, cert.notary_id.id)


# ---------------------------------------------------------------------------
# Setup-phase operations
# ---------------------------------------------------------------------------

DataPredicate = Callable[[SellerData], bool]


def validate_data(data: SellerData, predicate: DataPredicate | None = None) -> bool:
    """Pluggable data validation; the default stub accepts nonempty payloads."""
    if predicate is not None:
        return bool(predicate(data))
    return len(data.payload) > 0


def notarize(
    notary_keys: SigningKeyPair,
    notary_id: PartyId,
    data: SellerData,
    variant: Variant,
    rng: random.Random,
    *,
    group: GroupParams | None = None,
    predicate: DataPredicate | None = None,
) -> CertificatePackage:
    """Full setup phase: validate, encrypt under a fresh key, commit, sign.

    For the dlog variant the key is resampled until its derived exponent is
    nonzero, and the payload is encrypted under a key derived from that
    exponent (the buyer only ever learns the exponent).
    """
    if notary_id.public_key != notary_keys.public:
        raise ValueError("notary_id must carry the notary's verification key")
    if not validate_data(data, predicate):
        raise ValidationRejected("seller data failed validation")

    h2: Commitment2
    if variant is Variant.V3:
        if group is None:
            raise ValueError("the dlog variant requires group parameters")
        while True:
            key = rng.randbytes(crypto.KEY_LEN)
            exponent = crypto.scalar_from_key(key, group)
            if exponent is not None:
                break
        enc_key = crypto.symmetric_key_for_scalar(exponent)
        h2 = GroupPower(crypto.group_exp(group, group.g, exponent))
    else:
        key = rng.randbytes(crypto.KEY_LEN)
        enc_key = key
        if variant is Variant.V1:
            h2 = HashOfKey(crypto.sha256(key))
        else:
            h2 = HashOfKeyAndNotary(
                crypto.sha256(crypto.canonical_encode([key, notary_id.id]))
            )

    nonce = rng.randbytes(crypto.NONCE_LEN)
    ciphertext = crypto.encrypt(enc_key, data.payload, nonce)
    h1 = crypto.sha256(ciphertext.encoded())
    sigma = crypto.sign(notary_keys.seed, signing_payload(variant, h1, h2, data.seller))
    certificate = Certificate(
        h1=h1,
        h2=h2,
        seller_id=data.seller,
        notary_id=notary_id,
        sigma=sigma,
        group=group if variant is Variant.V3 else None,
    )
    return CertificatePackage(key=key, ciphertext=ciphertext, certificate=certificate)


# ---------------------------------------------------------------------------
# Buyer-side verification
# ---------------------------------------------------------------------------

class RejectReason(Enum):
    UNKNOWN_NOTARY = "unknown_notary"
    BAD_SIGNATURE = "bad_signature"
    CIPHERTEXT_MISMATCH = "ciphertext_mismatch"
    SELLER_MISMATCH = "seller_mismatch"


@dataclass(frozen=True)
class VerificationResult:
    ok: bool
    reason: RejectReason | None = None

    def __bool__(self) -> bool:
        return self.ok


def verify_certificate(
    cert: Certificate,
    trusted_notaries: Mapping[bytes, bytes],
    claimed_seller: PartyId,
    ciphertext: Ciphertext,
) -> VerificationResult:
    """Check notary trust, signature, ciphertext binding, and seller identity.

    Never raises; failures carry the first reason in that order.
    """
    public = trusted_notaries.get(cert.notary_id.id)
    if public is None:
        return VerificationResult(False, RejectReason.UNKNOWN_NOTARY)
    payload = signing_payload(cert.variant, cert.h1, cert.h2, cert.seller_id)
    if not crypto.verify(public, payload, cert.sigma):
        return VerificationResult(False, RejectReason.BAD_SIGNATURE)
    if crypto.sha256(ciphertext.encoded()) != cert.h1:
        return VerificationResult(False, RejectReason.CIPHERTEXT_MISMATCH)
    if cert.seller_id.id != claimed_seller.id:
        return VerificationResult(False, RejectReason.SELLER_MISMATCH)
    return VerificationResult(True)


# ---------------------------------------------------------------------------
# JSON serialization (hex for bytes, decimal strings for big integers)
# ---------------------------------------------------------------------------

def commitment_to_obj(h2: Commitment2) -> dict:
    if isinstance(h2, HashOfKey):
        return {"tag": "hash_of_key", "value": h2.digest.hex()}
    if isinstance(h2, HashOfKeyAndNotary):
        return {"tag": "hash_of_key_and_notary", "value": h2.digest.hex()}
    return {"tag": "group_power", "value": str(h2.element.value)}


def commitment_from_obj(obj: dict, group: GroupParams | None) -> Commitment2:
    tag = obj["tag"]
    if tag == "hash_of_key":
        return HashOfKey(bytes.fromhex(obj["value"]))
    if tag == "hash_of_key_and_notary":
        return HashOfKeyAndNotary(bytes.fromhex(obj["value"]))
    if tag == "group_power":
        if group is None:
            raise ValueError("group parameters required for a group_power commitment")
        return GroupPower(GroupElement(int(obj["value"]), group))
    raise ValueError(f"unknown commitment tag {tag!r}")


def group_to_obj(group: GroupParams) -> dict:
    return {"p": str(group.p), "q": str(group.q), "g": str(group.g)}


def group_from_obj(obj: dict) -> GroupParams:
    return GroupParams(p=int(obj["p"]), q=int(obj["q"]), g=int(obj["g"]))


def certificate_to_json(cert: Certificate) -> str:
    obj = {
        "variant": cert.variant.value,
        "h1": cert.h1.hex(),
        "h2": commitment_to_obj(cert.h2),
        "seller_id": cert.seller_id.id.hex(),
        "notary_id": cert.notary_id.id.hex(),
        "sigma": cert.sigma.hex(),
    }
    if cert.group is not None:
        obj["group"] = group_to_obj(cert.group)
    return json.dumps(obj, separators=(",", ":"))


def certificate_from_json(text: str) -> Certificate:
    obj = json.loads(text)
    group = group_from_obj(obj["group"]) if "group" in obj else None
    return Certificate(
        h1=bytes.fromhex(obj["h1"]),
        h2=commitment_from_obj(obj["h2"], group),
        seller_id=PartyId(bytes.fromhex(obj["seller_id"])),
        notary_id=PartyId(bytes.fromhex(obj["notary_id"])),
        sigma=bytes.fromhex(obj["sigma"]),
        group=group,
    )
