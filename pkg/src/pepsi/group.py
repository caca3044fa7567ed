"""Bilinear-group and modular-arithmetic primitives.

The protocols are written for a symmetric pairing ``e: G x G -> GT``.  We
run them on BLS12-381, which only has an asymmetric pairing
``G1 x G2 -> GT``.  The emulation: every source-group element lives in
G1, and an element whose discrete log relative to the generator is known
to whoever builds it (``g``, ``X1 = g^x1``, ``h = g^z``, ``g^r`` ...) also
carries a *twin* in G2 with the same exponent.  A pairing needs a twin on
at least one side.  Hash-derived elements (``H1(ID)``, keys derived from
it) never have one, and in every protocol pairing at least one argument
is a public generator power, so bilinearity holds exactly where the
protocols use it.
"""

from __future__ import annotations

import hashlib
import random
import secrets
import struct
from dataclasses import dataclass
from typing import Iterable, Union

import gmpy2
from petrelic.multiplicative.pairing import G1, G2, GT, G1Element as _P1, G2Element as _P2, GTElement as _PT

from pepsi import opcount

ORDER = int(G1.order())
SCALAR_BYTES = 32
GT_BYTES = 384
TAG_BITS = 256
TAG_BYTES = TAG_BITS // 8
KEY_BYTES = 32

H1_DST = b"PEPSI-V01-CS01-with-BLS12381G1_H1_"
H2_DOMAIN = b"PEPSI-V01-H2-tag"
H3_DOMAIN = b"PEPSI-V01-H3-key"
HPAD_DOMAIN = b"PEPSI-V01-Hprime-pad"

_system_rng = secrets.SystemRandom()


class EncodingError(ValueError):
    """Raised when bytes do not decode to a valid group element."""


class PairingError(ValueError):
    pass


def default_rng(rng: random.Random | None) -> random.Random:
    return _system_rng if rng is None else rng


@dataclass(frozen=True)
class Scalar:
    """Nonzero exponent modulo the group order."""

    value: int

    def __post_init__(self):
        if not 0 < self.value < ORDER:
            raise ValueError("scalar must lie in [1, q-1]")

    @classmethod
    def random(cls, rng: random.Random | None = None) -> "Scalar":
        return cls(default_rng(rng).randrange(1, ORDER))

    def inverse(self) -> "Scalar":
        return Scalar(pow(self.value, -1, ORDER))

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(SCALAR_BYTES, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> "Scalar":
        if len(data) != SCALAR_BYTES:
            raise EncodingError("scalar encoding must be 32 bytes")
        return cls(int.from_bytes(data, "big"))

    def __int__(self):
        return self.value


Exponent = Union[int, Scalar]


def _exponent(k: Exponent) -> int:
    return (k.value if isinstance(k, Scalar) else int(k)) % ORDER


def _decode_point(cls, data: bytes):
    if data == b"\x00":
        return cls.from_binary(data)
    p = cls.from_binary(data)
    if not p.is_valid() or p.to_binary() != data:
        raise EncodingError("not a canonical subgroup point")
    return p


class G1Element:
    """Element of the prime-order source group, optionally with its G2 twin."""

    __slots__ = ("_p", "_twin")

    def __init__(self, point: _P1, twin: _P2 | None = None):
        self._p = point
        self._twin = twin

    @classmethod
    def generator(cls) -> "G1Element":
        return cls(G1.generator(), G2.generator())

    @classmethod
    def identity(cls) -> "G1Element":
        return cls(G1.neutral_element(), G2.neutral_element())

    @property
    def has_twin(self) -> bool:
        return self._twin is not None

    def drop_twin(self) -> "G1Element":
        return G1Element(self._p)

    def is_identity(self) -> bool:
        return self._p.is_neutral_element()

    def in_subgroup(self) -> bool:
        if not (self.is_identity() or self._p.is_valid()):
            return False
        if self._twin is None:
            return True
        return self._twin.is_neutral_element() or self._twin.is_valid()

    def __mul__(self, other: "G1Element") -> "G1Element":
        if not isinstance(other, G1Element):
            return NotImplemented
        opcount.record_mul()
        twin = None
        if self._twin is not None and other._twin is not None:
            twin = self._twin * other._twin
        return G1Element(self._p * other._p, twin)

    def __truediv__(self, other: "G1Element") -> "G1Element":
        # a / b is tallied as one multiplication
        if not isinstance(other, G1Element):
            return NotImplemented
        opcount.record_mul()
        twin = None
        if self._twin is not None and other._twin is not None:
            twin = self._twin / other._twin
        return G1Element(self._p / other._p, twin)

    def __pow__(self, k: Exponent) -> "G1Element":
        e = _exponent(k)
        opcount.record_exp(e)
        twin = None if self._twin is None else self._twin ** e
        return G1Element(self._p ** e, twin)

    def __eq__(self, other):
        if not isinstance(other, G1Element):
            return NotImplemented
        return self._p == other._p

    def __hash__(self):
        return hash(self._p.to_binary())

    def __repr__(self):
        return f"G1Element({self._p.to_binary().hex()[:16]}...{', twin' if self.has_twin else ''})"

    def to_bytes(self) -> bytes:
        """``flag || len || G1 point [|| len || G2 twin]`` with compressed points."""
        p = self._p.to_binary()
        if self._twin is None:
            return b"\x00" + bytes([len(p)]) + p
        t = self._twin.to_binary()
        return b"\x01" + bytes([len(p)]) + p + bytes([len(t)]) + t

    @classmethod
    def from_bytes(cls, data: bytes) -> "G1Element":
        elem, rest = cls.read(data)
        if rest:
            raise EncodingError("trailing bytes after point encoding")
        return elem

    @classmethod
    def read(cls, data: bytes) -> tuple["G1Element", bytes]:
        """Decode one element from the front of ``data``; return it and the rest."""
        try:
            flag, n = data[0], data[1]
            if len(data) < 2 + n or flag not in (0, 1):
                raise EncodingError("truncated or unknown point encoding")
            p = _decode_point(_P1, bytes(data[2 : 2 + n]))
            rest = data[2 + n :]
            twin = None
            if flag == 1:
                m = rest[0]
                if len(rest) < 1 + m:
                    raise EncodingError("truncated twin encoding")
                twin = _decode_point(_P2, bytes(rest[1 : 1 + m]))
                rest = rest[1 + m :]
                # the twin must share the G1 point's exponent
                if p.pair(G2.generator()) != G1.generator().pair(twin):
                    raise EncodingError("twin does not match point")
        except IndexError as exc:
            raise EncodingError("truncated point encoding") from exc
        return cls(p, twin), bytes(rest)


class GtElement:
    """Element of the pairing target group."""

    __slots__ = ("_v",)

    def __init__(self, value: _PT):
        self._v = value

    @classmethod
    def identity(cls) -> "GtElement":
        return cls(GT.unity())

    def is_identity(self) -> bool:
        return self._v.is_unity()

    def __mul__(self, other: "GtElement") -> "GtElement":
        if not isinstance(other, GtElement):
            return NotImplemented
        opcount.record_mul()
        return GtElement(self._v * other._v)

    def __truediv__(self, other: "GtElement") -> "GtElement":
        if not isinstance(other, GtElement):
            return NotImplemented
        opcount.record_mul()
        return GtElement(self._v / other._v)

    def __pow__(self, k: Exponent) -> "GtElement":
        e = _exponent(k)
        opcount.record_exp(e)
        return GtElement(self._v ** e)

    def __eq__(self, other):
        if not isinstance(other, GtElement):
            return NotImplemented
        return self._v == other._v

    def __hash__(self):
        return hash(self.to_bytes())

    def __repr__(self):
        return f"GtElement({self.to_bytes().hex()[:16]}...)"

    def to_bytes(self) -> bytes:
        return self._v.to_binary()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GtElement":
        if len(data) != GT_BYTES:
            raise EncodingError("GT encoding must be 384 bytes")
        v = _PT.from_binary(bytes(data))
        if not (v.is_unity() or v.is_valid()) or v.to_binary() != data:
            raise EncodingError("not a canonical GT element")
        return cls(v)


def pairing(a: G1Element, b: G1Element) -> GtElement:
    """Symmetric pairing e(a, b); at least one argument must carry a twin."""
    if b._twin is not None:
        left, right = a._p, b._twin
    elif a._twin is not None:
        left, right = b._p, a._twin
    else:
        raise PairingError("neither argument has a known exponent relative to g")
    opcount.record_pairing()
    return GtElement(left.pair(right))


def hash_to_g1(label: bytes | str) -> G1Element:
    if isinstance(label, str):
        label = label.encode()
    if not label:
        raise ValueError("empty identifier")
    opcount.record_hash("H1")
    return G1Element(G1.hash_to_point(H1_DST + bytes(label)))


Hashable = Union[bytes, bytearray, memoryview, str, G1Element, GtElement, Scalar]


def _field(x: Hashable) -> bytes:
    if isinstance(x, (bytes, bytearray, memoryview)):
        return bytes(x)
    if isinstance(x, str):
        return x.encode()
    if isinstance(x, (G1Element, GtElement, Scalar)):
        return x.to_bytes()
    raise TypeError(f"cannot frame {type(x).__name__} for hashing")


def frame(inputs: Iterable[Hashable]) -> bytes:
    """Length-prefixed concatenation: each field is ``u64be(len) || bytes``."""
    out = bytearray()
    for x in inputs:
        b = _field(x)
        out += struct.pack(">Q", len(b))
        out += b
    return bytes(out)


def _digest(domain: bytes, inputs: Iterable[Hashable]) -> bytes:
    return hashlib.sha256(frame([domain]) + frame(inputs)).digest()


def hash_tag(inputs: Iterable[Hashable], bits: int = TAG_BITS) -> bytes:
    """H2: 32-byte tag.  ``bits < 256`` keeps only that many leading bits
    (zeroing the rest) and exists to force collisions in tests."""
    if not 0 < bits <= TAG_BITS:
        raise ValueError("tag bits must be in [1, 256]")
    opcount.record_hash("H2")
    d = _digest(H2_DOMAIN, inputs)
    if bits == TAG_BITS:
        return d
    full, rem = divmod(bits, 8)
    out = bytearray(TAG_BYTES)
    out[:full] = d[:full]
    if rem:
        out[full] = d[full] & (0xFF << (8 - rem)) & 0xFF
    return bytes(out)


def hash_key(inputs: Iterable[Hashable]) -> bytes:
    """H3: symmetric key of ``KEY_BYTES`` bytes, domain-separated from H2."""
    opcount.record_hash("H3")
    return _digest(H3_DOMAIN, inputs)


def hash_pad(inputs: Iterable[Hashable], nbytes: int) -> bytes:
    """H': expand the framed inputs to an ``nbytes`` one-time pad."""
    opcount.record_hash("H'")
    return hashlib.shake_256(frame([HPAD_DOMAIN]) + frame(inputs)).digest(nbytes)


def mod_exp(base: int, exponent: int, modulus: int) -> int:
    if modulus < 2:
        raise ValueError("modulus must be at least 2")
    if exponent < 0:
        raise ValueError("negative exponent; invert explicitly with mod_inv")
    opcount.record_exp(exponent)
    return int(gmpy2.powmod(base, exponent, modulus))


def mod_mul(a: int, b: int, modulus: int) -> int:
    opcount.record_mul()
    return a * b % modulus


def mod_inv(a: int, modulus: int) -> int:
    opcount.record_inv()
    try:
        return int(gmpy2.invert(a, modulus))
    except ZeroDivisionError as exc:
        raise ValueError("value not invertible modulo the modulus") from exc
