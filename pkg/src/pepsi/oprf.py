"""PEPSI over a blind-RSA oblivious PRF.

The RA holds an RSA key ``(N, e, d)`` on a safe modulus.  Anyone holding
``sigma_ID = H1(ID)^d mod N`` can compute the tag ``H2(sigma)`` and the key
``H3(sigma)``; nodes and queriers obtain ``sigma`` through the blind
protocol ``mu = H1(ID) * r^e``, ``mu' = mu^d``, ``sigma = mu' / r``, which
is the OPRF ``f_d(x) = H2(H1(x)^d)``.

There is no nonce renewal here: revoking a node means rotating the whole
key ``(N, e, d)``.
"""

from __future__ import annotations

import hashlib
import math
import random
import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Protocol

import gmpy2
import numpy as np

from pepsi import opcount
from pepsi.group import TAG_BITS, default_rng, frame, hash_key, hash_tag, mod_exp, mod_inv, mod_mul
from pepsi.symmetric import MAX_PAYLOAD, Measurement, NotMySubscriptionError, as_measurement, seal, unseal
from pepsi.wire import ReportEnvelope, SubscriptionUpload

DEFAULT_MODULUS_BITS = 2048
PAPER_MODULUS_BITS = 1024
MIN_MODULUS_BITS = 1024
DEFAULT_E = 65537
FDH_DOMAIN = b"PEPSI-V01-H1-fdh-ZN"


class MalformedSignatureError(ValueError):
    pass


@dataclass(frozen=True)
class RsaParams:
    N: int
    e: int

    @property
    def modulus_bits(self) -> int:
        return self.N.bit_length()

    @property
    def modulus_bytes(self) -> int:
        return (self.modulus_bits + 7) // 8


@dataclass(frozen=True)
class RsaSecret:
    d: int
    p: int
    q: int

    @property
    def N(self) -> int:
        return self.p * self.q

    @cached_property
    def _crt(self) -> tuple[int, int, int]:
        return self.d % (self.p - 1), self.d % (self.q - 1), pow(self.q, -1, self.p)


# -- safe primes ------------------------------------------------------------

_SIEVE_PRIMES = [int(p) for p in range(3, 1 << 16) if gmpy2.is_prime(p)]
_SIEVE_INV4 = [pow(4, -1, s) for s in _SIEVE_PRIMES]


def safe_prime(bits: int, rng: random.Random | None = None, window: int = 1 << 14) -> int:
    """Random ``bits``-bit prime ``p = 2p' + 1`` with ``p'`` prime.

    Candidates ``p' = base + 2k`` are sieved in a window so that neither
    ``p'`` nor ``2p' + 1`` has a factor below 2^16, then tested.
    """
    if bits < 8:
        raise ValueError("safe primes below 8 bits are not supported")
    rng = default_rng(rng)
    while True:
        base = rng.getrandbits(bits - 1) | (1 << (bits - 2)) | 1
        ok = np.ones(window, dtype=bool)
        for s, inv4 in zip(_SIEVE_PRIMES, _SIEVE_INV4):
            if s >= base:
                break
            r = base % s
            ok[(-r * ((s + 1) // 2)) % s :: s] = False  # s | base + 2k
            ok[(-(2 * r + 1) * inv4) % s :: s] = False  # s | 2(base + 2k) + 1
        for k in np.flatnonzero(ok).tolist():
            pp = base + 2 * k
            if pp.bit_length() != bits - 1:
                break
            p = 2 * pp + 1
            if gmpy2.powmod(2, pp - 1, pp) != 1 or gmpy2.powmod(2, p - 1, p) != 1:
                continue
            if gmpy2.is_prime(pp, 32) and gmpy2.is_prime(p, 32):
                return int(p)


def is_safe_prime(p: int) -> bool:
    return p > 5 and bool(gmpy2.is_prime(p, 32)) and bool(gmpy2.is_prime((p - 1) // 2, 32))


def oprf_setup(modulus_bits: int = DEFAULT_MODULUS_BITS, rng=None, e: int | None = DEFAULT_E) -> tuple[RsaParams, RsaSecret]:
    """Safe RSA modulus ``N = pq``.  ``e=None`` draws a random odd ``e < phi(N)``
    coprime to ``phi(N)`` instead of the short default."""
    if modulus_bits < MIN_MODULUS_BITS:
        raise ValueError(f"modulus must have at least {MIN_MODULUS_BITS} bits")
    rng = default_rng(rng)
    half = modulus_bits // 2
    while True:
        p = safe_prime(half, rng)
        q = safe_prime(modulus_bits - half, rng)
        N = p * q
        if p != q and N.bit_length() == modulus_bits:
            break
    phi = (p - 1) * (q - 1)
    if e is None:
        e = rng.randrange(3, phi, 2)
        while math.gcd(e, phi) != 1:
            e = rng.randrange(3, phi, 2)
    elif math.gcd(e, phi) != 1:
        raise ValueError("public exponent not coprime to phi(N)")
    d = pow(e, -1, phi)
    return RsaParams(N, e), RsaSecret(d, p, q)


# -- full-domain hash and signatures ---------------------------------------

def fdh(params: RsaParams, identifier) -> int:
    """H1: identifier -> Z_N*, by expand-then-reduce with rejection."""
    if isinstance(identifier, str):
        identifier = identifier.encode()
    if not identifier:
        raise ValueError("empty identifier")
    opcount.record_hash("H1")
    n = params.modulus_bytes + 16
    prefix = frame([FDH_DOMAIN, params.N.to_bytes(params.modulus_bytes, "big"), identifier])
    ctr = 0
    while True:
        x = int.from_bytes(hashlib.shake_256(prefix + struct.pack(">I", ctr)).digest(n), "big") % params.N
        if x > 1 and math.gcd(x, params.N) == 1:
            return x
        ctr += 1


@dataclass(frozen=True)
class Signature:
    id: bytes
    sigma: int
    modulus_bits: int

    @property
    def encoded_sigma(self) -> bytes:
        """Fixed-width big-endian, sized to the modulus; input to H2 and H3."""
        return self.sigma.to_bytes((self.modulus_bits + 7) // 8, "big")

    def to_bytes(self) -> bytes:
        return struct.pack(">H", self.modulus_bits) + self.encoded_sigma

    @classmethod
    def from_bytes(cls, data: bytes, identifier: bytes = b"") -> "Signature":
        if len(data) < 2:
            raise ValueError("truncated signature")
        (bits,) = struct.unpack(">H", data[:2])
        if len(data) != 2 + (bits + 7) // 8:
            raise ValueError("signature length does not match its modulus size")
        return cls(bytes(identifier), int.from_bytes(data[2:], "big"), bits)


def signature_is_valid(params: RsaParams, sig: Signature) -> bool:
    return 0 < sig.sigma < params.N and mod_exp(sig.sigma, params.e, params.N) == fdh(params, sig.id)


@dataclass(frozen=True)
class BlindState:
    r: int
    digest: int
    id: bytes


def blind_digest(params: RsaParams, digest: int, rng=None, identifier: bytes = b"", r: int | None = None):
    """Blind an already-hashed value: ``mu = digest * r^e mod N``."""
    N = params.N
    if r is None:
        rng = default_rng(rng)
        r = rng.randrange(2, N)
        while math.gcd(r, N) != 1:
            r = rng.randrange(2, N)
    elif math.gcd(r, N) != 1:
        raise ValueError("blinding factor must be coprime to N")
    mu = mod_mul(digest, mod_exp(r, params.e, N), N)
    return BlindState(r, digest, bytes(identifier)), mu


def blind(params: RsaParams, identifier, rng=None, r: int | None = None):
    if isinstance(identifier, str):
        identifier = identifier.encode()
    if not identifier:
        raise ValueError("empty identifier")
    return blind_digest(params, fdh(params, identifier), rng, identifier, r)


def sign_blinded(secret: RsaSecret, mu: int) -> int:
    """``mu^d mod N`` by CRT (Garner's recombination)."""
    N = secret.N
    if not 0 <= mu < N:
        raise ValueError("blinded value must lie in [0, N-1]")
    dp, dq, q_inv = secret._crt
    mp = gmpy2.powmod(mu, dp, secret.p)
    mq = gmpy2.powmod(mu, dq, secret.q)
    h = (q_inv * (mp - mq)) % secret.p
    return int(mq + h * secret.q)


def unblind(params: RsaParams, state: BlindState, mu_prime: int) -> Signature:
    """``sigma = mu' / r``; refuses a result with ``sigma^e != H1(ID)``."""
    N = params.N
    sigma = mod_mul(mu_prime % N, mod_inv(state.r, N), N)
    with opcount.verification():
        ok = mod_exp(sigma, params.e, N) == state.digest
    if not ok:
        raise MalformedSignatureError("malformed signature")
    return Signature(state.id, sigma, params.modulus_bits)


def sign_direct(params: RsaParams, secret: RsaSecret, identifier) -> Signature:
    """Plain registration: the RA sees the identifier and signs it."""
    if isinstance(identifier, str):
        identifier = identifier.encode()
    return Signature(bytes(identifier), sign_blinded(secret, fdh(params, identifier)), params.modulus_bits)


def obtain_signature(params: RsaParams, secret: RsaSecret, identifier, mode: str = "blind", rng=None) -> Signature:
    """Registration / query authorization with both parties in-process."""
    if mode == "plain":
        return sign_direct(params, secret, identifier)
    if mode != "blind":
        raise ValueError(f"unknown registration mode {mode!r}")
    state, mu = blind(params, identifier, rng)
    return unblind(params, state, sign_blinded(secret, mu))


class ObliviousPRF(Protocol):
    """Client/server seam for plugging in a different OPRF."""

    def blind(self, x: bytes, rng=None): ...

    def evaluate(self, blinded): ...

    def finalize(self, state, response) -> bytes: ...


@dataclass
class BlindRsaOprf:
    params: RsaParams
    secret: RsaSecret | None = None

    def blind(self, x: bytes, rng=None):
        return blind(self.params, x, rng)

    def evaluate(self, blinded: int) -> int:
        if self.secret is None:
            raise ValueError("evaluation needs the signing key")
        return sign_blinded(self.secret, blinded)

    def finalize(self, state: BlindState, response: int) -> bytes:
        return hash_tag([unblind(self.params, state, response).encoded_sigma])


def oprf_eval(params: RsaParams, secret: RsaSecret, x, rng=None) -> bytes:
    """``f_d(x) = H2(H1(x)^d)``, computed through the blind protocol."""
    f = BlindRsaOprf(params, secret)
    state, mu = f.blind(x, rng)
    return f.finalize(state, f.evaluate(mu))


# -- subscription, report, notification -------------------------------------

@dataclass(frozen=True)
class OprfSubscription:
    tag: bytes
    sigma: Signature
    id: bytes


def oprf_subscribe(sig: Signature, handle: bytes = b"querier", tag_bits: int = TAG_BITS):
    tag = hash_tag([sig.encoded_sigma], bits=tag_bits)
    return OprfSubscription(tag, sig, sig.id), SubscriptionUpload(handle, tag, None)


def oprf_report_material(sig: Signature, tag_bits: int = TAG_BITS) -> tuple[bytes, bytes]:
    return hash_tag([sig.encoded_sigma], bits=tag_bits), hash_key([sig.encoded_sigma])


def oprf_produce_report(sig: Signature, measurement, rng=None, tag_bits: int = TAG_BITS, max_payload: int = MAX_PAYLOAD) -> ReportEnvelope:
    measurement = as_measurement(measurement).check(max_payload)
    tag, key = oprf_report_material(sig, tag_bits)
    return ReportEnvelope(tag, seal(key, measurement.payload, tag, rng), None)


def oprf_open_notification(sub: OprfSubscription, envelope: ReportEnvelope) -> Measurement:
    if envelope.tag != sub.tag:
        raise NotMySubscriptionError("not my subscription")
    key = hash_key([sub.sigma.encoded_sigma])
    return Measurement(unseal(key, envelope.ciphertext, envelope.tag))
