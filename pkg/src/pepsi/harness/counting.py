"""Per-step operation counts for the mobile node and querier.

Each step is run once with fixed keys; only the party named in the step
is tallied.  The authority's share of an interactive step runs outside
the counting block, which is then resumed for the party's last move.
"""

from __future__ import annotations

import random
from functools import lru_cache

from pepsi import oprf, protocol
from pepsi.opcount import OpCounters, counting

STEPS = ("node_registration", "data_report", "query_authorization", "query_subscription", "notification")

ID = b"temperature|san francisco"

# (exponentiations, multiplications, pairings, hashes) per party; None is
# the table's dash.
TABLE2 = {
    "ibe": {
        "node_registration": (None, None, None, None),
        "data_report": (1, None, 2, 1),
        "query_authorization": (1, 3, None, 1),
        "query_subscription": (None, None, 2, 1),
        "notification": (None, None, None, 1),
    },
    "oprf": {
        "node_registration": (1, 2, None, 1),
        "data_report": (None, None, None, 2),
        "query_authorization": (1, 2, None, 1),
        "query_subscription": (None, None, None, 1),
        "notification": (None, None, None, 1),
    },
}

# Data report in the IBE instantiation evaluates H1, H2 and H3 where the
# table lists a single hash; that row is reported, not asserted.
HASH_DISCREPANCIES = {("ibe", "data_report"): "table lists 1 hash; the report computes H1, H2 and H3"}


@lru_cache(maxsize=None)
def _ibe_world():
    rng = random.Random(101)
    params, secret = protocol.pepsi_setup(rng=rng)
    auth = protocol.authorize_query(params, secret, ID, rng)
    return params, secret, auth


@lru_cache(maxsize=None)
def _oprf_world(bits: int = oprf.PAPER_MODULUS_BITS):
    rng = random.Random(102)
    params, secret = oprf.oprf_setup(bits, rng)
    sig = oprf.obtain_signature(params, secret, ID, rng=rng)
    return params, secret, sig


def count_ops(instantiation: str, step: str, rng: random.Random | None = None) -> OpCounters:
    if step not in STEPS:
        raise ValueError(f"unknown step {step!r}; expected one of {', '.join(STEPS)}")
    rng = rng or random.Random(103)
    c = OpCounters()
    if instantiation == "ibe":
        params, secret, auth = _ibe_world()
        if step == "node_registration":
            # the node only receives (ID, z)
            protocol.register_node(secret, params, ID)
        elif step == "data_report":
            cred = protocol.register_node(secret, params, ID)
            with counting(c):
                protocol.produce_report(params, cred, b"21.5C", rng)
        elif step == "query_authorization":
            with counting(c):
                state, mu = protocol.request_authorization(params, ID, rng)
            mu1, mu2 = protocol.grant_authorization(secret, mu)
            with counting(c):
                protocol.complete_authorization(params, state, mu1, mu2)
        elif step == "query_subscription":
            with counting(c):
                protocol.subscribe(params, auth)
        else:
            sub, _ = protocol.subscribe(params, auth)
            env = protocol.produce_report(params, protocol.register_node(secret, params, ID), b"21.5C", rng)
            with counting(c):
                protocol.open_notification(sub, env)
    elif instantiation == "oprf":
        params, secret, sig = _oprf_world()
        if step in ("node_registration", "query_authorization"):
            # identical blind-signature exchange for either party
            with counting(c):
                state, mu = oprf.blind(params, ID, rng)
            reply = oprf.sign_blinded(secret, mu)
            with counting(c):
                oprf.unblind(params, state, reply)
        elif step == "data_report":
            with counting(c):
                oprf.oprf_produce_report(sig, b"21.5C", rng)
        elif step == "query_subscription":
            with counting(c):
                oprf.oprf_subscribe(sig)
        else:
            sub, _ = oprf.oprf_subscribe(sig)
            env = oprf.oprf_produce_report(sig, b"21.5C", rng)
            with counting(c):
                oprf.oprf_open_notification(sub, env)
    else:
        raise ValueError(f"unknown instantiation {instantiation!r}")
    if c.checks is None:
        c.checks = OpCounters()
    return c


def _cell(v) -> int:
    return 0 if v is None else v


def compare_table2(instantiation: str, step: str, counters: OpCounters | None = None) -> dict:
    """Measured against published counts.  ``strict`` covers exponentiations,
    multiplications and pairings; ``hash_ok`` is reported separately."""
    c = counters or count_ops(instantiation, step)
    exp, mul, pair, hashes = (_cell(v) for v in TABLE2[instantiation][step])
    measured = (c.exponentiations, c.multiplications, c.pairings, c.hash_total)
    return {
        "instantiation": instantiation,
        "step": step,
        "expected": {"exponentiations": exp, "multiplications": mul, "pairings": pair, "hashes": hashes},
        "measured": dict(zip(("exponentiations", "multiplications", "pairings", "hashes"), measured)),
        "strict": measured[:3] == (exp, mul, pair),
        "hash_ok": measured[3] == hashes,
        "note": HASH_DISCREPANCIES.get((instantiation, step), ""),
    }
