"""Byte formats exchanged with the broker.

This module deliberately imports no cryptography: the broker depends on it
and nothing else, so everything the broker can see is a tag, an epoch, a
handle or an opaque ciphertext.

Report envelope::

    version (1) || epoch (u64be, IBE only) || tag (32) || len (u32be) || ciphertext

Subscription upload::

    version (1) || epoch (u64be, IBE only) || len (u32be) || handle || tag (32)

Version 1 is the IBE instantiation (with epoch), version 2 the OPRF one
(no epoch field).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

VERSION_IBE = 1
VERSION_OPRF = 2
TAG_BYTES = 32


class WireFormatError(ValueError):
    pass


def _version(epoch: int | None) -> int:
    return VERSION_OPRF if epoch is None else VERSION_IBE


def _check_tag(tag: bytes) -> None:
    if not isinstance(tag, (bytes, bytearray)) or len(tag) != TAG_BYTES:
        raise WireFormatError(f"tag must be {TAG_BYTES} bytes, got {len(tag) if tag is not None else None}")


def _check_epoch(epoch: int | None) -> None:
    if epoch is not None and not 0 <= epoch < 2**64:
        raise WireFormatError("epoch out of range")


@dataclass(frozen=True)
class ReportEnvelope:
    """``(T, CT)`` plus epoch.  ``sender`` is transport metadata and is never
    serialized."""

    tag: bytes
    ciphertext: bytes
    epoch: int | None = None
    sender: bytes | None = None

    @property
    def version(self) -> int:
        return _version(self.epoch)

    def validate(self) -> "ReportEnvelope":
        _check_tag(self.tag)
        _check_epoch(self.epoch)
        if not self.ciphertext:
            raise WireFormatError("empty ciphertext")
        if len(self.ciphertext) >= 2**32:
            raise WireFormatError("ciphertext too long")
        return self

    def to_bytes(self) -> bytes:
        self.validate()
        head = bytes([self.version])
        if self.epoch is not None:
            head += struct.pack(">Q", self.epoch)
        return head + bytes(self.tag) + struct.pack(">I", len(self.ciphertext)) + bytes(self.ciphertext)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ReportEnvelope":
        env, rest = cls.read(data)
        if rest:
            raise WireFormatError("trailing bytes after envelope")
        return env

    @classmethod
    def read(cls, data: bytes) -> tuple["ReportEnvelope", bytes]:
        data = bytes(data)
        if not data:
            raise WireFormatError("empty envelope")
        version, pos = data[0], 1
        epoch = None
        if version == VERSION_IBE:
            if len(data) < pos + 8:
                raise WireFormatError("truncated epoch")
            (epoch,) = struct.unpack_from(">Q", data, pos)
            pos += 8
        elif version != VERSION_OPRF:
            raise WireFormatError(f"unknown envelope version {version}")
        if len(data) < pos + TAG_BYTES + 4:
            raise WireFormatError("truncated envelope")
        tag = data[pos : pos + TAG_BYTES]
        pos += TAG_BYTES
        (n,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if len(data) < pos + n:
            raise WireFormatError("truncated ciphertext")
        env = cls(tag, data[pos : pos + n], epoch)
        return env.validate(), data[pos + n :]

    def stripped(self) -> "ReportEnvelope":
        return self if self.sender is None else replace(self, sender=None)


@dataclass(frozen=True)
class SubscriptionUpload:
    """``(Q, T*)`` as sent to the broker; ``handle`` is opaque."""

    handle: bytes
    tag: bytes
    epoch: int | None = None

    @property
    def version(self) -> int:
        return _version(self.epoch)

    def validate(self) -> "SubscriptionUpload":
        _check_tag(self.tag)
        _check_epoch(self.epoch)
        if not self.handle:
            raise WireFormatError("empty querier handle")
        return self

    def to_bytes(self) -> bytes:
        self.validate()
        head = bytes([self.version])
        if self.epoch is not None:
            head += struct.pack(">Q", self.epoch)
        return head + struct.pack(">I", len(self.handle)) + bytes(self.handle) + bytes(self.tag)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SubscriptionUpload":
        data = bytes(data)
        if not data:
            raise WireFormatError("empty subscription")
        version, pos = data[0], 1
        epoch = None
        if version == VERSION_IBE:
            if len(data) < pos + 8:
                raise WireFormatError("truncated epoch")
            (epoch,) = struct.unpack_from(">Q", data, pos)
            pos += 8
        elif version != VERSION_OPRF:
            raise WireFormatError(f"unknown subscription version {version}")
        if len(data) < pos + 4:
            raise WireFormatError("truncated subscription")
        (n,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if len(data) != pos + n + TAG_BYTES:
            raise WireFormatError("bad subscription length")
        return cls(data[pos : pos + n], data[pos + n :], epoch).validate()


@dataclass(frozen=True)
class TransportFrame:
    """What the network operator receives from a handset: the envelope plus
    everything the cellular network attaches to it."""

    envelope: ReportEnvelope
    sender: bytes | None = None
    cell: bytes | None = None
    timestamp: int | None = None
    extra: dict = field(default_factory=dict)

    def metadata_fields(self) -> list[bytes]:
        out = [v for v in (self.sender, self.cell, self.envelope.sender) if v]
        if self.timestamp is not None:
            out.append(str(self.timestamp).encode())
        out += [v if isinstance(v, bytes) else str(v).encode() for v in self.extra.values()]
        return out
