"""Blind-anonymous identity-based encryption.

Four algorithms: setup, a three-message blind key extraction (request,
respond, finalize), encryption and decryption.  The authority never sees
the identity it issues a key for; the user only accepts key material that
passes the pairing check ``e(sk1, g) == e(H(id), X1)`` (and likewise for
``sk2``).

Decryption xors the recomputed pad with ``c2``, and the identity that
enters the pad hash travels inside :class:`IbeSecretKey`.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass

from pepsi import opcount
from pepsi.group import (
    ORDER,
    EncodingError,
    G1Element,
    Scalar,
    hash_pad,
    hash_to_g1,
    pairing,
)

VERSION = 1
MESSAGE_BYTES = 32


class MalformedKeyError(ValueError):
    """Unblinded key material failed the pairing validity check."""


def _bytes(identity: bytes | str) -> bytes:
    if isinstance(identity, str):
        identity = identity.encode()
    if not identity:
        raise ValueError("empty identifier")
    return bytes(identity)


@dataclass(frozen=True)
class IbePublicKey:
    g: G1Element
    X1: G1Element
    X2: G1Element
    message_bytes: int = MESSAGE_BYTES

    @property
    def q(self) -> int:
        return ORDER

    @property
    def message_bits(self) -> int:
        return 8 * self.message_bytes

    def to_bytes(self) -> bytes:
        return (
            bytes([VERSION])
            + self.g.to_bytes()
            + self.X1.to_bytes()
            + self.X2.to_bytes()
            + struct.pack(">H", self.message_bytes)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "IbePublicKey":
        if not data or data[0] != VERSION:
            raise EncodingError("unknown public key version")
        g, rest = G1Element.read(data[1:])
        X1, rest = G1Element.read(rest)
        X2, rest = G1Element.read(rest)
        if len(rest) != 2:
            raise EncodingError("bad public key length")
        (n,) = struct.unpack(">H", rest)
        if not (g.has_twin and X1.has_twin and X2.has_twin):
            raise EncodingError("public key elements must carry their twins")
        return cls(g, X1, X2, n)


@dataclass(frozen=True)
class IbeMasterSecret:
    x1: Scalar
    x2: Scalar


@dataclass(frozen=True)
class BlindingState:
    r: Scalar
    identity: bytes


@dataclass(frozen=True)
class IbeSecretKey:
    sk1: G1Element
    sk2: G1Element
    identity: bytes

    def to_bytes(self) -> bytes:
        return (
            bytes([VERSION])
            + self.sk1.to_bytes()
            + self.sk2.to_bytes()
            + struct.pack(">I", len(self.identity))
            + self.identity
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "IbeSecretKey":
        if not data or data[0] != VERSION:
            raise EncodingError("unknown secret key version")
        sk1, rest = G1Element.read(data[1:])
        sk2, rest = G1Element.read(rest)
        if len(rest) < 4:
            raise EncodingError("truncated secret key")
        (n,) = struct.unpack(">I", rest[:4])
        if len(rest) != 4 + n:
            raise EncodingError("bad secret key length")
        return cls(sk1, sk2, bytes(rest[4:]))


@dataclass(frozen=True)
class IbeCiphertext:
    c1: G1Element
    c2: bytes

    def to_bytes(self) -> bytes:
        return bytes([VERSION]) + self.c1.to_bytes() + struct.pack(">I", len(self.c2)) + self.c2

    @classmethod
    def from_bytes(cls, data: bytes) -> "IbeCiphertext":
        if not data or data[0] != VERSION:
            raise EncodingError("unknown ciphertext version")
        c1, rest = G1Element.read(data[1:])
        if len(rest) < 4:
            raise EncodingError("truncated ciphertext")
        (n,) = struct.unpack(">I", rest[:4])
        if len(rest) != 4 + n:
            raise EncodingError("bad ciphertext length")
        return cls(c1, bytes(rest[4:]))


def ibe_setup(security: int = 128, rng: random.Random | None = None):
    """Return ``(IbePublicKey, IbeMasterSecret)`` with fresh ``x1, x2``."""
    if security > 128:
        raise ValueError("BLS12-381 provides at most 128-bit security")
    x1, x2 = Scalar.random(rng), Scalar.random(rng)
    g = G1Element.generator()
    return IbePublicKey(g, g ** x1, g ** x2), IbeMasterSecret(x1, x2)


def blind_extract_request(pk: IbePublicKey, identity, rng=None, r: Scalar | None = None):
    """User side, first move: ``req = H(id) * g^r``."""
    identity = _bytes(identity)
    if r is None:
        r = Scalar.random(rng)
    request = hash_to_g1(identity) * (pk.g ** r)
    return BlindingState(r, identity), request


def blind_extract_respond(msk: IbeMasterSecret, request: G1Element):
    """Authority side: ``(req^x1, req^x2)``.  The authority sees nothing else."""
    if not isinstance(request, G1Element) or not request.in_subgroup():
        raise ValueError("request is not a valid group element")
    request = request.drop_twin()
    return request ** msk.x1, request ** msk.x2


def key_is_valid(pk: IbePublicKey, sk: IbeSecretKey) -> bool:
    h = hash_to_g1(sk.identity)
    return pairing(sk.sk1, pk.g) == pairing(h, pk.X1) and pairing(sk.sk2, pk.g) == pairing(h, pk.X2)


def blind_extract_finalize(pk: IbePublicKey, state: BlindingState, sk1p: G1Element, sk2p: G1Element) -> IbeSecretKey:
    """User side, last move: strip ``X_i^r`` and check the result."""
    sk1 = (sk1p / (pk.X1 ** state.r)).drop_twin()
    sk2 = (sk2p / (pk.X2 ** state.r)).drop_twin()
    key = IbeSecretKey(sk1, sk2, state.identity)
    with opcount.verification():
        ok = key_is_valid(pk, key)
    if not ok:
        raise MalformedKeyError("malformed key material")
    return key


def extract(pk: IbePublicKey, msk: IbeMasterSecret, identity, rng=None) -> IbeSecretKey:
    """Run the full blind extraction with both parties in-process."""
    state, req = blind_extract_request(pk, identity, rng)
    return blind_extract_finalize(pk, state, *blind_extract_respond(msk, req))


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def ibe_encrypt(pk: IbePublicKey, identity, message: bytes, rng=None, r: Scalar | None = None) -> IbeCiphertext:
    identity = _bytes(identity)
    if len(message) != pk.message_bytes:
        raise ValueError(f"message must be exactly {pk.message_bytes} bytes")
    if r is None:
        r = Scalar.random(rng)
    h = hash_to_g1(identity)
    c1 = pk.g ** r
    Z1 = pairing(h, pk.X1) ** r
    Z2 = pairing(h, pk.X2) ** r
    pad = hash_pad([identity, c1, Z1, Z2], pk.message_bytes)
    return IbeCiphertext(c1, _xor(pad, message))


def ibe_decrypt(pk: IbePublicKey, sk: IbeSecretKey, ct: IbeCiphertext) -> bytes:
    if len(ct.c2) != pk.message_bytes:
        raise ValueError("ciphertext length does not match the message space")
    Z1 = pairing(sk.sk1, ct.c1)
    Z2 = pairing(sk.sk2, ct.c1)
    pad = hash_pad([sk.identity, ct.c1, Z1, Z2], pk.message_bytes)
    return _xor(pad, ct.c2)


__all__ = [
    "IbePublicKey",
    "IbeMasterSecret",
    "IbeSecretKey",
    "IbeCiphertext",
    "BlindingState",
    "MalformedKeyError",
    "ibe_setup",
    "blind_extract_request",
    "blind_extract_respond",
    "blind_extract_finalize",
    "key_is_valid",
    "extract",
    "ibe_encrypt",
    "ibe_decrypt",
]
