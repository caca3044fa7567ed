"""JSON key files for the CLI.  Byte fields are hex; nothing here is
encrypted at rest."""

from __future__ import annotations

import json
import os
from pathlib import Path

from pepsi import ibe, oprf, protocol
from pepsi.group import G1Element, GtElement, Scalar


def _h(b: bytes) -> str:
    return bytes(b).hex()


def _b(s: str) -> bytes:
    return bytes.fromhex(s)


def dump_pepsi(params: protocol.PepsiParams, secret: protocol.PepsiSecret | None = None) -> dict:
    d = {"pk": _h(params.pk.to_bytes()), "h": _h(params.h.to_bytes()), "epoch": params.epoch}
    if secret is not None:
        d |= {"x1": _h(secret.msk.x1.to_bytes()), "x2": _h(secret.msk.x2.to_bytes()), "z": _h(secret.z.to_bytes())}
    return d


def load_pepsi(d: dict):
    params = protocol.PepsiParams(ibe.IbePublicKey.from_bytes(_b(d["pk"])), G1Element.from_bytes(_b(d["h"])), d["epoch"])
    secret = None
    if "z" in d:
        msk = ibe.IbeMasterSecret(Scalar.from_bytes(_b(d["x1"])), Scalar.from_bytes(_b(d["x2"])))
        secret = protocol.PepsiSecret(msk, Scalar.from_bytes(_b(d["z"])))
    return params, secret


def dump_rsa(params: oprf.RsaParams, secret: oprf.RsaSecret | None = None) -> dict:
    d = {"N": format(params.N, "x"), "e": format(params.e, "x")}
    if secret is not None:
        d |= {"d": format(secret.d, "x"), "p": format(secret.p, "x"), "q": format(secret.q, "x")}
    return d


def load_rsa(d: dict):
    params = oprf.RsaParams(int(d["N"], 16), int(d["e"], 16))
    secret = oprf.RsaSecret(int(d["d"], 16), int(d["p"], 16), int(d["q"], 16)) if "d" in d else None
    return params, secret


def dump_credential(cred) -> dict:
    if isinstance(cred, protocol.NodeCredential):
        return {"id": _h(cred.id), "z": _h(cred.z.to_bytes()), "epoch": cred.epoch}
    return {"id": _h(cred.id), "sigma": _h(cred.to_bytes())}


def load_credential(d: dict):
    if "z" in d:
        return protocol.NodeCredential(_b(d["id"]), Scalar.from_bytes(_b(d["z"])), d["epoch"])
    return oprf.Signature.from_bytes(_b(d["sigma"]), _b(d["id"]))


def dump_authorization(auth) -> dict:
    if isinstance(auth, protocol.QueryAuthorization):
        return {"id": _h(auth.id), "sk": _h(auth.sk.to_bytes())}
    return dump_credential(auth)


def load_authorization(d: dict):
    if "sk" in d:
        return protocol.QueryAuthorization(_b(d["id"]), ibe.IbeSecretKey.from_bytes(_b(d["sk"])))
    return load_credential(d)


def dump_subscription(sub) -> dict:
    if isinstance(sub, protocol.SubscriptionSecret):
        return {
            "tag": _h(sub.tag),
            "id": _h(sub.id),
            "Z1": _h(sub.Z1.to_bytes()),
            "Z2": _h(sub.Z2.to_bytes()),
            "epoch": sub.epoch,
            "h": _h(sub.h.to_bytes()),
        }
    return {"tag": _h(sub.tag), "id": _h(sub.id), "sigma": _h(sub.sigma.to_bytes())}


def load_subscription(d: dict):
    if "Z1" in d:
        return protocol.SubscriptionSecret(
            _b(d["tag"]),
            _b(d["id"]),
            GtElement.from_bytes(_b(d["Z1"])),
            GtElement.from_bytes(_b(d["Z2"])),
            d["epoch"],
            G1Element.from_bytes(_b(d["h"])),
        )
    sig = oprf.Signature.from_bytes(_b(d["sigma"]), _b(d["id"]))
    return oprf.OprfSubscription(_b(d["tag"]), sig, sig.id)


class Home:
    """``authority.json`` (RA secret and public parameters), ``public.json``,
    ``nodes/<name>.json`` and ``queriers/<name>.json``."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def path(self, *parts: str) -> Path:
        return self.root.joinpath(*parts)

    def read(self, *parts: str) -> dict:
        p = self.path(*parts)
        if not p.exists():
            raise FileNotFoundError(f"{p} does not exist; run the earlier setup steps first")
        return json.loads(p.read_text())

    def write(self, data: dict, *parts: str) -> None:
        p = self.path(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        tmp = p.with_suffix(".tmp")
        tmp.write_text(json.dumps(data, indent=1, sort_keys=True))
        os.replace(tmp, p)

    def exists(self, *parts: str) -> bool:
        return self.path(*parts).exists()
