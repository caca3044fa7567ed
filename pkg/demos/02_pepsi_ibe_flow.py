"""
Participatory sensing over IBE
==============================

A node reports a temperature, a querier subscribed to the same
identifier receives it, and the broker matches on opaque tags.
"""

import random

from pepsi import protocol
from pepsi.broker import Broker, relay_strip
from pepsi.identifiers import canonical_id
from pepsi.wire import TransportFrame

rng = random.Random(2)
ra = protocol.RegistrationAuthority.setup(rng)
broker = Broker()

ident = canonical_id("Temperature", "San Francisco")
print("identifier:", ident)

node = ra.register_node("node-7", ident)

# blind authorization: the RA answers a single group element
state, mu = protocol.request_authorization(ra.params, ident, rng)
auth = protocol.complete_authorization(ra.params, state, *ra.grant_authorization(mu))

sub, upload = protocol.subscribe(ra.params, auth, handle=b"alice-1")
broker.accept_subscription(upload.to_bytes())
print("subscription tag:", sub.tag.hex()[:32], "...")

env = protocol.produce_report(ra.params, node, b"21.5C", rng)
frame = TransportFrame(env, sender=b"node-7", cell=b"cell-310-410", timestamp=1700000000)
broker.accept_report(relay_strip(frame).to_bytes())
print("report tag:      ", env.tag.hex()[:32], "...")

for delivered in broker.drain_deliveries(b"alice-1"):
    print("alice reads:", protocol.open_notification(sub, delivered).payload)

# a different identifier yields an unrelated tag
other = protocol.produce_report(ra.params, ra.register_node("node-8", b"pollution|san francisco"), b"AQI 40", rng)
print("pollution report matches alice:", other.tag == sub.tag)
