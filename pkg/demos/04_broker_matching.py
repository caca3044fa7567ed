"""
Indexed matching against the double loop
========================================
"""

import random

from pepsi.broker import Broker, match_quadratic
from pepsi.wire import ReportEnvelope, SubscriptionUpload

rng = random.Random(4)
tags = [rng.randbytes(32) for _ in range(50)]

b = Broker(auto_match=False)
for _ in range(200):
    b.accept_report(ReportEnvelope(rng.choice(tags), rng.randbytes(16), 0))
for i in range(80):
    b.accept_subscription(SubscriptionUpload(b"q%d" % (i % 20), rng.choice(tags), 0))

marks = b.match_all()
print(len(marks), "delivery marks")
print("equal to the quadratic scan:", marks == match_quadratic(b.reports, b.subscriptions))

# a subscription arriving later still sees stored reports
late = SubscriptionUpload(b"late", tags[0], 0)
b.auto_match = True
b.accept_subscription(late)
print("retroactive deliveries for 'late':", b.pending_count(b"late"))

purge = b.epoch_advance(1)
print(f"epoch 1: dropped {purge.subscriptions} subscriptions and {purge.reports} reports")
