"""
Participatory sensing over a blind-RSA OPRF
===========================================

Reporting costs two hashes and one AES-GCM encryption; the RSA work
happens once, at registration.
"""

import random
import time

from pepsi import oprf

rng = random.Random(3)
t0 = time.perf_counter()
params, secret = oprf.oprf_setup(2048, rng)
print(f"2048-bit safe modulus in {time.perf_counter() - t0:.1f}s, e = {params.e}")

ident = b"noise|paris"

# blind signature: the RA signs mu = H1(id) * r^e
state, mu = oprf.blind(params, ident, rng)
node_sig = oprf.unblind(params, state, oprf.sign_blinded(secret, mu))
print("sigma == H1(id)^d:", node_sig.sigma == pow(oprf.fdh(params, ident), secret.d, params.N))

querier_sig = oprf.obtain_signature(params, secret, ident, rng=rng)
sub, upload = oprf.oprf_subscribe(querier_sig, b"bob")

env = oprf.oprf_produce_report(node_sig, b"62 dB", rng)
print("tags equal:", env.tag == sub.tag)
print("bob reads:", oprf.oprf_open_notification(sub, env).payload)
