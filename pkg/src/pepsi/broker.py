"""The service provider: subscription table, report table, blind matching,
delivery queues, plus the network operator's metadata-stripping relay.

Only :mod:`pepsi.wire` is imported, so every decision made here is a
function of tag bytes, epochs and opaque handles.

Matching uses an index keyed by ``(epoch, tag)`` instead of the double
loop over reports and subscriptions; :func:`match_quadratic` is that loop,
kept as the reference the index is tested against.  A report already
stored matches a subscription that arrives later (retroactive matching),
within a bounded retention window.
"""

from __future__ import annotations

import io
import struct
import threading
from collections import OrderedDict, defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from pepsi.wire import ReportEnvelope, SubscriptionUpload, TransportFrame, WireFormatError

DEFAULT_RETENTION_REPORTS = 10_000
DEFAULT_RETENTION_SECONDS = 3600

SNAPSHOT_MAGIC = b"PEPSIBRK"
SNAPSHOT_VERSION = 1


class BrokerError(ValueError):
    pass


class MalformedMessageError(BrokerError):
    pass


class StaleEpochError(BrokerError):
    pass


@dataclass(frozen=True)
class SubscriptionEntry:
    querier_handle: bytes
    tag: bytes
    epoch: int | None = None
    created_at: int = 0

    def upload(self) -> SubscriptionUpload:
        return SubscriptionUpload(self.querier_handle, self.tag, self.epoch)


@dataclass(frozen=True)
class StoredReport:
    report_id: int
    envelope: ReportEnvelope
    received_at: int


@dataclass(frozen=True, order=True)
class DeliveryMark:
    querier_handle: bytes
    report_id: int


@dataclass(frozen=True)
class PurgeReport:
    epoch: int
    subscriptions: int
    reports: int


def relay_strip(message: TransportFrame | ReportEnvelope) -> ReportEnvelope:
    """Network-operator pass-through: keep ``(version, epoch, tag, ciphertext)``,
    drop sender, cell, timestamps and anything else.  Forwarding is
    immediate and idempotent."""
    envelope = message.envelope if isinstance(message, TransportFrame) else message
    return ReportEnvelope(envelope.tag, envelope.ciphertext, envelope.epoch)


def match_quadratic(reports: Iterable[StoredReport], subscriptions: Iterable[SubscriptionEntry]) -> set[DeliveryMark]:
    """For every stored report and every subscription: mark if tags (and epochs) agree."""
    subscriptions = list(subscriptions)
    marks = set()
    for r in reports:
        for s in subscriptions:
            if r.envelope.tag == s.tag and r.envelope.epoch == s.epoch:
                marks.add(DeliveryMark(s.querier_handle, r.report_id))
    return marks


@dataclass
class Broker:
    """Linearizable state machine; all public methods hold one lock.

    ``auto_match`` runs matching incrementally as reports and
    subscriptions arrive; with it off, nothing is marked until
    :meth:`match_all`.
    """

    epoch: int = 0
    auto_match: bool = True
    retention_reports: int = DEFAULT_RETENTION_REPORTS
    retention_seconds: int = DEFAULT_RETENTION_SECONDS
    now: int = 0
    _subs: dict = field(default_factory=dict, repr=False)  # (handle, tag) -> SubscriptionEntry
    _sub_index: dict = field(default_factory=lambda: defaultdict(set), repr=False)  # (epoch, tag) -> handles
    _reports: "OrderedDict[int, StoredReport]" = field(default_factory=OrderedDict, repr=False)
    _report_index: dict = field(default_factory=lambda: defaultdict(list), repr=False)  # (epoch, tag) -> ids
    _next_id: int = 0
    _marked: dict = field(default_factory=lambda: defaultdict(set), repr=False)  # report id -> handles marked
    _pending: dict = field(default_factory=lambda: defaultdict(dict), repr=False)  # handle -> id -> envelope
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    # -- intake ------------------------------------------------------------

    def _check_epoch(self, epoch: int | None) -> None:
        if epoch is not None and epoch != self.epoch:
            raise StaleEpochError(f"epoch {epoch} is not the current epoch {self.epoch}")

    def accept_subscription(self, entry: SubscriptionEntry | SubscriptionUpload | bytes) -> bool:
        """Store ``(Q, T*)``.  Returns False if it was already present."""
        with self._lock:
            if isinstance(entry, (bytes, bytearray)):
                try:
                    entry = SubscriptionUpload.from_bytes(entry)
                except WireFormatError as exc:
                    raise MalformedMessageError(f"malformed subscription: {exc}") from exc
            if isinstance(entry, SubscriptionUpload):
                entry = SubscriptionEntry(entry.handle, entry.tag, entry.epoch, self.now)
            try:
                entry.upload().validate()
            except WireFormatError as exc:
                raise MalformedMessageError(f"malformed subscription: {exc}") from exc
            self._check_epoch(entry.epoch)
            key = (entry.querier_handle, entry.tag)
            if key in self._subs:
                return False
            self._subs[key] = entry
            self._sub_index[(entry.epoch, entry.tag)].add(entry.querier_handle)
            if self.auto_match:
                for rid in self._report_index.get((entry.epoch, entry.tag), ()):
                    self._mark(entry.querier_handle, rid)
            return True

    def accept_report(self, envelope: ReportEnvelope | TransportFrame | bytes) -> int:
        """Store ``(T, CT)`` and return its report id."""
        with self._lock:
            if isinstance(envelope, TransportFrame):
                envelope = relay_strip(envelope)
            if isinstance(envelope, (bytes, bytearray)):
                try:
                    envelope = ReportEnvelope.from_bytes(envelope)
                except WireFormatError as exc:
                    raise MalformedMessageError(f"malformed report: {exc}") from exc
            try:
                envelope = relay_strip(envelope).validate()
            except WireFormatError as exc:
                raise MalformedMessageError(f"malformed report: {exc}") from exc
            self._check_epoch(envelope.epoch)
            rid = self._store(envelope, self.now)
            if self.auto_match:
                for handle in sorted(self._sub_index.get((envelope.epoch, envelope.tag), ())):
                    self._mark(handle, rid)
            self._expire()
            return rid

    def _store(self, envelope: ReportEnvelope, received_at: int, rid: int | None = None) -> int:
        if rid is None:
            rid = self._next_id
        self._next_id = max(self._next_id, rid + 1)
        self._reports[rid] = StoredReport(rid, envelope, received_at)
        self._report_index[(envelope.epoch, envelope.tag)].append(rid)
        return rid

    def _mark(self, handle: bytes, rid: int) -> DeliveryMark | None:
        marked = self._marked[rid]
        if handle in marked:
            return None
        marked.add(handle)
        self._pending[handle][rid] = self._reports[rid].envelope
        return DeliveryMark(handle, rid)

    # -- matching and delivery ---------------------------------------------

    def match_all(self) -> set[DeliveryMark]:
        """Mark every (subscription, report) pair with equal tag and epoch
        that has not been marked before; return the new marks."""
        with self._lock:
            new = set()
            for key, handles in self._sub_index.items():
                rids = self._report_index.get(key)
                if not rids:
                    continue
                for handle in handles:
                    for rid in rids:
                        mark = self._mark(handle, rid)
                        if mark is not None:
                            new.add(mark)
            return new

    def drain_deliveries(self, handle: bytes) -> list[ReportEnvelope]:
        """Pending envelopes for ``handle`` in report-arrival order; at most once."""
        with self._lock:
            pending = self._pending.pop(handle, {})
            return [pending[rid] for rid in sorted(pending)]

    def pending_count(self, handle: bytes | None = None) -> int:
        with self._lock:
            if handle is not None:
                return len(self._pending.get(handle, ()))
            return sum(len(p) for p in self._pending.values())

    # -- views ---------------------------------------------------------------

    @property
    def subscriptions(self) -> list[SubscriptionEntry]:
        with self._lock:
            return list(self._subs.values())

    @property
    def reports(self) -> list[StoredReport]:
        with self._lock:
            return list(self._reports.values())

    @property
    def marks(self) -> set[DeliveryMark]:
        with self._lock:
            return {DeliveryMark(h, rid) for rid, hs in self._marked.items() for h in hs}

    # -- retention and epochs -------------------------------------------------

    def advance_clock(self, seconds: int) -> None:
        with self._lock:
            if seconds < 0:
                raise BrokerError("logical time cannot go backwards")
            self.now += seconds
            self._expire()

    def _drop_report(self, rid: int) -> None:
        rep = self._reports.pop(rid)
        key = (rep.envelope.epoch, rep.envelope.tag)
        ids = self._report_index[key]
        ids.remove(rid)
        if not ids:
            del self._report_index[key]
        self._marked.pop(rid, None)

    def _expire(self) -> None:
        while len(self._reports) > self.retention_reports:
            self._drop_report(next(iter(self._reports)))
        horizon = self.now - self.retention_seconds
        while self._reports:
            rid, rep = next(iter(self._reports.items()))
            if rep.received_at >= horizon:
                break
            self._drop_report(rid)

    def epoch_advance(self, new_epoch: int) -> PurgeReport:
        """Enter ``new_epoch`` (must be current + 1) and drop older state.

        Reports already marked for delivery stay in their queues: they were
        matched within their own epoch.
        """
        with self._lock:
            if new_epoch != self.epoch + 1:
                raise BrokerError(f"epoch must advance from {self.epoch} to {self.epoch + 1}, got {new_epoch}")
            old_subs = [k for k, s in self._subs.items() if s.epoch is not None and s.epoch < new_epoch]
            for k in old_subs:
                s = self._subs.pop(k)
                handles = self._sub_index[(s.epoch, s.tag)]
                handles.discard(s.querier_handle)
                if not handles:
                    del self._sub_index[(s.epoch, s.tag)]
            old_reports = [rid for rid, r in self._reports.items() if r.envelope.epoch is not None and r.envelope.epoch < new_epoch]
            for rid in old_reports:
                self._drop_report(rid)
            self.epoch = new_epoch
            return PurgeReport(new_epoch, len(old_subs), len(old_reports))

    # -- persistence -----------------------------------------------------------

    def snapshot(self) -> bytes:
        """Length-prefixed records: ``kind (1) || u32be len || body``."""
        with self._lock:
            out = io.BytesIO()
            out.write(SNAPSHOT_MAGIC + bytes([SNAPSHOT_VERSION]))
            header = struct.pack(">QQQQQB", self.epoch, self.now, self._next_id, self.retention_reports, self.retention_seconds, self.auto_match)
            _record(out, b"H", header)
            for s in self._subs.values():
                _record(out, b"S", struct.pack(">Q", s.created_at) + s.upload().to_bytes())
            for r in self._reports.values():
                _record(out, b"R", struct.pack(">QQ", r.report_id, r.received_at) + r.envelope.to_bytes())
            for m in sorted(self.marks):
                pending = m.report_id in self._pending.get(m.querier_handle, {})
                _record(out, b"P" if pending else b"D", struct.pack(">Q", m.report_id) + m.querier_handle)
            # pending deliveries whose report has since been purged carry their envelope
            for handle, items in sorted(self._pending.items()):
                for rid, env in sorted(items.items()):
                    if rid not in self._reports:
                        _record(out, b"Q", struct.pack(">QI", rid, len(handle)) + handle + env.to_bytes())
            return out.getvalue()

    @classmethod
    def restore(cls, data: bytes) -> "Broker":
        if data[: len(SNAPSHOT_MAGIC)] != SNAPSHOT_MAGIC or data[len(SNAPSHOT_MAGIC)] != SNAPSHOT_VERSION:
            raise MalformedMessageError("not a broker snapshot")
        pos = len(SNAPSHOT_MAGIC) + 1
        b = None
        while pos < len(data):
            kind, n = data[pos : pos + 1], struct.unpack_from(">I", data, pos + 1)[0]
            body = data[pos + 5 : pos + 5 + n]
            if len(body) != n:
                raise MalformedMessageError("truncated snapshot record")
            pos += 5 + n
            if kind == b"H":
                epoch, now, next_id, rr, rs, am = struct.unpack(">QQQQQB", body)
                b = cls(epoch=epoch, auto_match=bool(am), retention_reports=rr, retention_seconds=rs, now=now)
                b._next_id = next_id
            elif b is None:
                raise MalformedMessageError("snapshot record before header")
            elif kind == b"S":
                (created,) = struct.unpack_from(">Q", body)
                up = SubscriptionUpload.from_bytes(body[8:])
                e = SubscriptionEntry(up.handle, up.tag, up.epoch, created)
                b._subs[(e.querier_handle, e.tag)] = e
                b._sub_index[(e.epoch, e.tag)].add(e.querier_handle)
            elif kind == b"R":
                rid, received = struct.unpack_from(">QQ", body)
                b._store(ReportEnvelope.from_bytes(body[16:]), received, rid)
            elif kind in (b"P", b"D"):
                (rid,) = struct.unpack_from(">Q", body)
                handle = bytes(body[8:])
                b._marked[rid].add(handle)
                if kind == b"P":
                    b._pending[handle][rid] = b._reports[rid].envelope
            elif kind == b"Q":
                rid, hn = struct.unpack_from(">QI", body)
                handle = bytes(body[12 : 12 + hn])
                b._pending[handle][rid] = ReportEnvelope.from_bytes(body[12 + hn :])
            else:
                raise MalformedMessageError(f"unknown snapshot record {kind!r}")
        if b is None:
            raise MalformedMessageError("snapshot has no header")
        return b


def _record(out: io.BytesIO, kind: bytes, body: bytes) -> None:
    out.write(kind + struct.pack(">I", len(body)) + body)
