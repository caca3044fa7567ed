"""PEPSI over blind-anonymous IBE.

Roles and messages:

* the registration authority (RA) runs :func:`pepsi_setup`, hands nodes
  ``(ID, z)`` at registration, answers blinded authorization requests and
  periodically rotates ``z`` (:func:`renew_nonce`);
* a querier turns an authorization ``(sk1, sk2)`` for ``ID*`` into a tag
  ``T* = H2(ID*, h, e(h, sk1), e(h, sk2))``;
* a node reporting on ``ID`` computes ``Z_i = e(H1(ID)^z, X_i)``, the same
  tag ``T = H2(ID, h, Z1, Z2)`` and a key ``k = H3(ID, h, Z1, Z2)``.

Both sides land on ``e(H1(ID), g)^(x_i z)``, so tags agree exactly when
identifiers do.

Any registered node holds the raw ``z`` and can therefore report (and
derive tags) under any identifier; that is how the protocol is defined,
and nothing here restricts it.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from pepsi import ibe
from pepsi.group import TAG_BITS, G1Element, GtElement, Scalar, hash_key, hash_tag, hash_to_g1, pairing
from pepsi.identifiers import require_canonical
from pepsi.symmetric import MAX_PAYLOAD, Measurement, NotMySubscriptionError, as_measurement, seal, unseal
from pepsi.wire import ReportEnvelope, SubscriptionUpload


class StaleCredentialError(ValueError):
    pass


class MalformedAuthorizationError(ibe.MalformedKeyError):
    pass


@dataclass(frozen=True)
class PepsiParams:
    pk: ibe.IbePublicKey
    h: G1Element
    epoch: int = 0
    tag_bits: int = TAG_BITS  # < 256 only in collision tests

    @property
    def g(self) -> G1Element:
        return self.pk.g

    @property
    def X1(self) -> G1Element:
        return self.pk.X1

    @property
    def X2(self) -> G1Element:
        return self.pk.X2


@dataclass(frozen=True)
class PepsiSecret:
    msk: ibe.IbeMasterSecret
    z: Scalar


@dataclass(frozen=True)
class NodeCredential:
    id: bytes
    z: Scalar
    epoch: int


@dataclass(frozen=True)
class QueryAuthorization:
    id: bytes
    sk: ibe.IbeSecretKey


@dataclass(frozen=True)
class SubscriptionSecret:
    """A querier's record ``(T*, ID*, Z1*, Z2*)``, plus the ``h`` and epoch
    it was computed for."""

    tag: bytes
    id: bytes
    Z1: GtElement
    Z2: GtElement
    epoch: int
    h: G1Element


def pepsi_setup(security: int = 128, rng: random.Random | None = None) -> tuple[PepsiParams, PepsiSecret]:
    pk, msk = ibe.ibe_setup(security, rng)
    z = Scalar.random(rng)
    return PepsiParams(pk, pk.g ** z, 0), PepsiSecret(msk, z)


def register_node(secret: PepsiSecret, params: PepsiParams, identifier) -> NodeCredential:
    return NodeCredential(require_canonical(identifier), secret.z, params.epoch)


# Query authorization: request (querier) -> grant (RA) -> complete (querier)

def request_authorization(params: PepsiParams, identifier, rng=None, r: Scalar | None = None):
    """Returns ``(state, mu)``; only ``mu`` goes to the RA."""
    return ibe.blind_extract_request(params.pk, require_canonical(identifier), rng, r)


def grant_authorization(secret: PepsiSecret, mu: G1Element) -> tuple[G1Element, G1Element]:
    return ibe.blind_extract_respond(secret.msk, mu)


def complete_authorization(params: PepsiParams, state: ibe.BlindingState, mu1: G1Element, mu2: G1Element) -> QueryAuthorization:
    try:
        sk = ibe.blind_extract_finalize(params.pk, state, mu1, mu2)
    except ibe.MalformedKeyError as exc:
        raise MalformedAuthorizationError("malformed authorization") from exc
    return QueryAuthorization(state.identity, sk)


def authorize_query(params: PepsiParams, secret: PepsiSecret, identifier, rng=None) -> QueryAuthorization:
    """Both sides of query authorization in one call."""
    state, mu = request_authorization(params, identifier, rng)
    return complete_authorization(params, state, *grant_authorization(secret, mu))


def authorization_is_valid(params: PepsiParams, auth: QueryAuthorization) -> bool:
    return auth.sk.identity == auth.id and ibe.key_is_valid(params.pk, auth.sk)


def _material(identifier: bytes, h: G1Element, Z1: GtElement, Z2: GtElement) -> list:
    return [identifier, h, Z1, Z2]


def subscribe(params: PepsiParams, auth: QueryAuthorization, handle: bytes = b"querier") -> tuple[SubscriptionSecret, SubscriptionUpload]:
    Z1 = pairing(params.h, auth.sk.sk1)
    Z2 = pairing(params.h, auth.sk.sk2)
    tag = hash_tag(_material(auth.id, params.h, Z1, Z2), bits=params.tag_bits)
    sub = SubscriptionSecret(tag, auth.id, Z1, Z2, params.epoch, params.h)
    return sub, SubscriptionUpload(handle, tag, params.epoch)


def report_material(params: PepsiParams, cred: NodeCredential) -> tuple[bytes, bytes]:
    """``(T, k)`` for a credential; independent of the measurement, so a
    node may compute it ahead of time."""
    if cred.epoch != params.epoch:
        raise StaleCredentialError("stale credential")
    hz = hash_to_g1(cred.id) ** cred.z
    Z1 = pairing(hz, params.X1)
    Z2 = pairing(hz, params.X2)
    m = _material(cred.id, params.h, Z1, Z2)
    return hash_tag(m, bits=params.tag_bits), hash_key(m)


def produce_report(params: PepsiParams, cred: NodeCredential, measurement, rng=None, max_payload: int = MAX_PAYLOAD) -> ReportEnvelope:
    measurement = as_measurement(measurement).check(max_payload)
    tag, key = report_material(params, cred)
    return ReportEnvelope(tag, seal(key, measurement.payload, tag, rng), params.epoch)


def open_notification(sub: SubscriptionSecret, envelope: ReportEnvelope) -> Measurement:
    if envelope.tag != sub.tag:
        raise NotMySubscriptionError("not my subscription")
    key = hash_key(_material(sub.id, sub.h, sub.Z1, sub.Z2))
    return Measurement(unseal(key, envelope.ciphertext, envelope.tag))


def renew_nonce(
    secret: PepsiSecret,
    params: PepsiParams,
    registry: Mapping[str, bytes] | None = None,
    evicted: Iterable[str] = (),
    rng=None,
) -> tuple[PepsiSecret, PepsiParams, list[tuple[str, NodeCredential]]]:
    """Fresh ``z' != z``, ``h' = g^z'``, epoch + 1.

    ``registry`` maps node names to their identifiers; the returned list
    holds the new credential for every node that is not evicted, sorted by
    name.  Delivery is direct and authenticated.
    """
    z = Scalar.random(rng)
    while z == secret.z:
        z = Scalar.random(rng)
    new_secret = replace(secret, z=z)
    new_params = replace(params, h=params.g ** z, epoch=params.epoch + 1)
    evicted = set(evicted)
    out = [
        (name, register_node(new_secret, new_params, ident))
        for name, ident in sorted((registry or {}).items())
        if name not in evicted
    ]
    return new_secret, new_params, out


@dataclass
class RegistrationAuthority:
    """Stateful RA: owns the secret, the node registry and the evictions.

    Mutations take ``_lock``, so a renewal is atomic with respect to
    concurrent registrations.
    """

    params: PepsiParams
    secret: PepsiSecret
    registry: dict = field(default_factory=dict)
    evicted: set = field(default_factory=set)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    @classmethod
    def setup(cls, rng=None) -> "RegistrationAuthority":
        return cls(*pepsi_setup(rng=rng))

    def register_node(self, name: str, identifier) -> NodeCredential:
        with self._lock:
            cred = register_node(self.secret, self.params, identifier)
            self.registry[name] = cred.id
            self.evicted.discard(name)
            return cred

    def grant_authorization(self, mu: G1Element):
        return grant_authorization(self.secret, mu)

    def evict(self, name: str) -> None:
        with self._lock:
            self.evicted.add(name)

    def renew(self, rng=None) -> list[tuple[str, NodeCredential]]:
        with self._lock:
            self.secret, self.params, out = renew_nonce(self.secret, self.params, self.registry, self.evicted, rng)
            return out
