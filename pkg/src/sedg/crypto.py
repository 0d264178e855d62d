"""Shared cryptographic primitives for the exchange protocols.

Hashing, authenticated symmetric encryption, signatures, prime-order
subgroup arithmetic, and the canonical byte encoding used everywhere a
multi-part value is hashed or signed. Everything here is pure: values are
immutable and callers thread their own randomness.
"""
from __future__ import annotations

import hashlib
import random
import struct
from dataclasses import dataclass
from typing import Sequence, Union

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

DIGEST_LEN = 32
KEY_LEN = 32
NONCE_LEN = 12
TAG_LEN = 16
SEED_LEN = 32
SIGNATURE_LEN = 64

_KDF_LABEL = b"sedg3-kdf"


class AuthenticationFailure(Exception):
    """Decryption rejected: wrong key, wrong nonce, or tampered ciphertext."""


class DomainError(Exception):
    """A group operand is outside the prime-order subgroup."""


# ---------------------------------------------------------------------------
# Hashing and canonical encoding
# ---------------------------------------------------------------------------

def sha256(data: bytes) -> bytes:
    """32-byte SHA-256 digest."""
    return hashlib.sha256(data).digest()


def canonical_encode(parts: Sequence[bytes]) -> bytes:
    """Length-prefixed concatenation: a 4-byte big-endian size before each part.

    Injective over lists of byte strings, unlike raw concatenation, so the
    same encoding is safe to hash and to sign.
    """
    out = bytearray()
    for part in parts:
        if len(part) >= 1 << 32:
            raise ValueError("part too long for a 4-byte length prefix")
        out += struct.pack(">I", len(part))
        out += part
    return bytes(out)


# ---------------------------------------------------------------------------
# Authenticated encryption
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ciphertext:
    """AEAD output: 12-byte nonce plus body (payload and a 16-byte tag).

    The nonce travels with the body so a single hash over ``encoded()``
    commits to everything a holder of the key needs to decrypt.
    """

    nonce: bytes
    body: bytes

    def __post_init__(self) -> None:
        if len(self.nonce) != NONCE_LEN:
            raise ValueError(f"nonce must be {NONCE_LEN} bytes")
        if len(self.body) < TAG_LEN:
            raise ValueError("ciphertext body shorter than the authentication tag")

    def encoded(self) -> bytes:
        return self.nonce + self.body


def encrypt(key: bytes, plaintext: bytes, nonce: bytes) -> Ciphertext:
    """Authenticated encryption (ChaCha20-Poly1305) under a 32-byte key."""
    _check_key(key)
    if len(nonce) != NONCE_LEN:
        raise ValueError(f"nonce must be {NONCE_LEN} bytes")
    body = ChaCha20Poly1305(key).encrypt(nonce, plaintext, None)
    return Ciphertext(nonce=nonce, body=body)


def decrypt(key: bytes, ciphertext: Ciphertext) -> bytes:
    """Recover the plaintext; raises AuthenticationFailure on any mismatch."""
    _check_key(key)
    try:
        return ChaCha20Poly1305(key).decrypt(ciphertext.nonce, ciphertext.body, None)
    except InvalidTag as exc:
        raise AuthenticationFailure("ciphertext rejected") from exc


def _check_key(key: bytes) -> None:
    if len(key) != KEY_LEN:
        raise ValueError(f"key must be {KEY_LEN} bytes")


# ---------------------------------------------------------------------------
# Signatures (Ed25519)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SigningKeyPair:
    """Ed25519 key pair: 32-byte secret seed and 32-byte verification key."""

    seed: bytes
    public: bytes

    @classmethod
    def from_seed(cls, seed: bytes) -> "SigningKeyPair":
        if len(seed) != SEED_LEN:
            raise ValueError(f"seed must be {SEED_LEN} bytes")
        public = Ed25519PrivateKey.from_private_bytes(seed).public_key().public_bytes_raw()
        return cls(seed=seed, public=public)

    @classmethod
    def generate(cls, rng: random.Random) -> "SigningKeyPair":
        return cls.from_seed(rng.randbytes(SEED_LEN))


def sign(seed: bytes, message: bytes) -> bytes:
    """Deterministic 64-byte signature over the exact message bytes."""
    if len(seed) != SEED_LEN:
        raise ValueError(f"seed must be {SEED_LEN} bytes")
    return Ed25519PrivateKey.from_private_bytes(seed).sign(message)


def verify(public: bytes, message: bytes, signature: bytes) -> bool:
    """True iff the signature was produced by the paired seed over this message.

    Malformed keys or signatures simply verify false.
    """
    try:
        Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
    except Exception:
        return False
    return True


# ---------------------------------------------------------------------------
# Prime-order subgroup arithmetic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupParams:
    """The order-q subgroup of Z_p* generated by g, with q dividing p-1."""

    p: int
    q: int
    g: int

    def __post_init__(self) -> None:
        if self.p <= 3 or self.q <= 1:
            raise ValueError("modulus and subgroup order must exceed trivial sizes")
        if (self.p - 1) % self.q != 0:
            raise ValueError("q must divide p-1")
        if not 1 < self.g < self.p:
            raise ValueError("generator out of range")
        if pow(self.g, self.q, self.p) != 1:
            raise ValueError("generator does not have order dividing q")

    def element_len(self) -> int:
        return (self.p.bit_length() + 7) // 8

    def scalar_len(self) -> int:
        return (self.q.bit_length() + 7) // 8

    def contains(self, value: int) -> bool:
        """Membership in the order-q subgroup."""
        return 1 <= value < self.p and pow(value, self.q, self.p) == 1


@dataclass(frozen=True)
class GroupElement:
    """A validated member of the order-q subgroup."""

    value: int
    params: GroupParams

    def __post_init__(self) -> None:
        if not self.params.contains(self.value):
            raise DomainError(f"{self.value} is not in the order-{self.params.q} subgroup")

    def encoded(self) -> bytes:
        return self.value.to_bytes(self.params.element_len(), "big")


@dataclass(frozen=True)
class Scalar:
    """An exponent in [1, q-1]."""

    value: int
    params: GroupParams

    def __post_init__(self) -> None:
        if not 0 < self.value < self.params.q:
            raise ValueError("scalar out of range [1, q-1]")

    def encoded(self) -> bytes:
        return self.value.to_bytes(self.params.scalar_len(), "big")


def group_exp(
    params: GroupParams,
    base: Union[GroupElement, int],
    exponent: Union[Scalar, int],
) -> GroupElement:
    """Modular exponentiation inside the subgroup.

    The base may be a validated element or a raw integer (the generator,
    typically); raw integers are membership-checked first. Integer exponents
    are accepted so tests can exercise the identity exponent q.
    """
    if isinstance(base, GroupElement):
        if base.params != params:
            raise DomainError("base belongs to a different group")
        base_value = base.value
    else:
        base_value = int(base)
        if not params.contains(base_value):
            raise DomainError(f"base {base_value} is not in the subgroup")
    exp_value = exponent.value if isinstance(exponent, Scalar) else int(exponent)
    if exp_value < 1:
        raise ValueError("exponent must be positive")
    return GroupElement(value=pow(base_value, exp_value, params.p), params=params)


def scalar_mul(a: Scalar, b: Scalar) -> Scalar:
    _same_group(a, b)
    return Scalar(value=(a.value * b.value) % a.params.q, params=a.params)


def scalar_inv(a: Scalar) -> Scalar:
    return Scalar(value=pow(a.value, -1, a.params.q), params=a.params)


def _same_group(a: Scalar, b: Scalar) -> None:
    if a.params != b.params:
        raise ValueError("scalars belong to different groups")


def scalar_from_key(key: bytes, params: GroupParams) -> Scalar | None:
    """The key's 32 bytes as a big-endian integer reduced mod q.

    Returns None when the reduction lands on zero; the caller resamples.
    """
    _check_key(key)
    value = int.from_bytes(key, "big") % params.q
    if value == 0:
        return None
    return Scalar(value=value, params=params)


def symmetric_key_for_scalar(exponent: Scalar) -> bytes:
    """Symmetric encryption key bound to a discrete-log exponent.

    One secret serves both as exponent and encryption key; this KDF keeps
    the two roles separated.
    """
    return sha256(canonical_encode([_KDF_LABEL, exponent.encoded()]))


def scalar_draw_len(params: GroupParams) -> int:
    # 16 extra bytes keep the modular bias of draw_scalar negligible.
    return params.scalar_len() + 16


def draw_scalar(rng: random.Random, params: GroupParams) -> Scalar:
    """Near-uniform scalar in [1, q-1] from the supplied randomness source."""
    raw = int.from_bytes(rng.randbytes(scalar_draw_len(params)), "big")
    return Scalar(value=raw % (params.q - 1) + 1, params=params)


# Tiny group for exhaustive tests: every exponent pair can be enumerated.
TEST_GROUP = GroupParams(p=23, q=11, g=2)

# 2048-bit MODP group (RFC 3526 group 14). p is a safe prime, so squaring
# the standard generator 2 yields a generator of the prime-order subgroup
# of order q = (p-1)/2.
_MODP_2048_P = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1"
    "29024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245"
    "E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3D"
    "C2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F"
    "83655D23DCA3AD961C62F356208552BB9ED529077096966D"
    "670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9"
    "DE2BCBF6955817183995497CEA956AE515D2261898FA0510"
    "15728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)
MODP_2048 = GroupParams(p=_MODP_2048_P, q=(_MODP_2048_P - 1) // 2, g=4)

GROUPS: dict[str, GroupParams] = {
    "test": TEST_GROUP,
    "modp2048": MODP_2048,
}
