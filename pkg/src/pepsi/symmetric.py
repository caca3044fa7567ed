"""Authenticated encryption of report payloads (AES-256-GCM).

A blob is ``nonce (12) || ciphertext || gcm tag (16)``.  The report tag is
bound in as associated data.  Decrypting under the wrong key fails loudly,
which is how a querier notices a tag collision instead of reading garbage.
"""

from __future__ import annotations

from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from pepsi.group import KEY_BYTES, default_rng

NONCE_BYTES = 12
MAX_PAYLOAD = 64 * 1024


class DecryptionError(ValueError):
    pass


class NotMySubscriptionError(ValueError):
    pass


@dataclass(frozen=True)
class Measurement:
    payload: bytes

    def check(self, max_payload: int = MAX_PAYLOAD) -> "Measurement":
        if len(self.payload) > max_payload:
            raise ValueError(f"payload of {len(self.payload)} bytes exceeds the {max_payload}-byte limit")
        return self


def as_measurement(data) -> Measurement:
    if isinstance(data, Measurement):
        return data
    if isinstance(data, str):
        data = data.encode()
    return Measurement(bytes(data))


def seal(key: bytes, payload: bytes, aad: bytes = b"", rng=None) -> bytes:
    if len(key) != KEY_BYTES:
        raise ValueError("key must be 32 bytes")
    nonce = default_rng(rng).getrandbits(8 * NONCE_BYTES).to_bytes(NONCE_BYTES, "big")
    return nonce + AESGCM(key).encrypt(nonce, payload, aad)


def unseal(key: bytes, blob: bytes, aad: bytes = b"") -> bytes:
    if len(blob) < NONCE_BYTES + 16:
        raise DecryptionError("corrupt or colliding report")
    try:
        return AESGCM(key).decrypt(blob[:NONCE_BYTES], blob[NONCE_BYTES:], aad)
    except InvalidTag as exc:
        raise DecryptionError("corrupt or colliding report") from exc
