"""
Blind key extraction and IBE round trip
=======================================

The authority issues a key for an identity it never sees.
"""

import random

from pepsi import ibe
from pepsi.group import hash_to_g1

rng = random.Random(1)
pk, msk = ibe.ibe_setup(rng=rng)

# the user hides H(id) behind g^r; the authority only sees this point
state, request = ibe.blind_extract_request(pk, "alice@example.org", rng)
print("authority sees:", request.to_bytes().hex()[:48], "...")

sk1p, sk2p = ibe.blind_extract_respond(msk, request)
sk = ibe.blind_extract_finalize(pk, state, sk1p, sk2p)

# same key as direct extraction with the master secret
h = hash_to_g1("alice@example.org")
print("equals H(id)^x1:", sk.sk1 == h ** msk.x1.value)
print("equals H(id)^x2:", sk.sk2 == h ** msk.x2.value)

message = b"thirty-two bytes of secret data!"
ct = ibe.ibe_encrypt(pk, "alice@example.org", message, rng)
print("decrypts:", ibe.ibe_decrypt(pk, sk, ct) == message)

# tampered key material is refused before use
try:
    ibe.blind_extract_finalize(pk, state, sk1p * pk.g, sk2p)
except ibe.MalformedKeyError as exc:
    print("tampered response:", exc)
