"""Acceptance criteria, one test each.  Every test prints a single
``criterion N: PASS|FAIL ...`` line (visible without ``-s``)."""

import math
import random
import time

import pytest

from pepsi import ibe, oprf, protocol
from pepsi.broker import Broker, match_quadratic
from pepsi.group import hash_to_g1
from pepsi.harness import bench, compare_table2, parse_scenario, random_scenario, run_scenario
from pepsi.harness.counting import STEPS
from pepsi.wire import ReportEnvelope, SubscriptionUpload

from conftest import TOY_D, TOY_E, TOY_N, brute_mod_exp

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    return emit


def soundness_scenario(inst: str, instances: int, seed: int) -> str:
    rng = random.Random(seed)
    lines = [f"instantiation {inst}", f"seed {seed}"]
    events = []
    for i in range(instances):
        ident = f"kw{rng.getrandbits(48):x}|loc{i}"
        payload = rng.randbytes(rng.randrange(1, 48)).hex()
        lines += [f'node n{i} "{ident}"', f"querier q{i}"]
        events += [
            f"register n{i}",
            f'authorize q{i} "{ident}"',
            f'subscribe q{i} "{ident}"',
            f"report n{i} {payload}",
            f"expect q{i} {payload}",
        ]
    return "\n".join(lines + events) + "\n"


@pytest.mark.parametrize("inst", ["ibe", "oprf"])
def test_criterion_01_soundness(inst, verdict):
    text = soundness_scenario(inst, 1000, 1001)
    sc = parse_scenario(text)
    t0 = time.perf_counter()
    r = run_scenario(sc)
    elapsed = time.perf_counter() - t0
    expected = {f"q{i}": {e.args[1].encode(): 1} for i, e in enumerate(x for x in sc.events if x.kind == "report")}
    exact = all(dict(r.delivered[q]) == want for q, want in expected.items())
    ok = r.passed and r.oracle_consistent and exact and elapsed < 60
    verdict(1, ok, f"[{inst}] 1000 instances, {len(r.failures)} mismatches, {elapsed:.1f}s (< 60s)")


def test_criterion_02_non_match(verdict, rsa_keys, pepsi_keys):
    rng = random.Random(1002)
    pool = [f"id{rng.getrandbits(64):x}|x".encode() for _ in range(2500)]
    params, secret = pepsi_keys
    ibe_tags = {i: protocol.report_material(params, protocol.register_node(secret, params, i))[0] for i in pool}
    rp, rs = rsa_keys
    oprf_tags = {i: oprf.oprf_report_material(oprf.sign_direct(rp, rs, i))[0] for i in pool}
    pairs = set()
    while len(pairs) < 10_000:
        a, b = rng.sample(pool, 2)
        pairs.add((a, b))
    collisions = sum(ibe_tags[a] == ibe_tags[b] for a, b in pairs) + sum(oprf_tags[a] == oprf_tags[b] for a, b in pairs)
    verdict(2, collisions == 0, f"10^4 distinct-id pairs per instantiation, {collisions} tag collisions")


def test_criterion_03_key_validity(verdict, ibe_keys):
    pk, msk = ibe_keys
    rng = random.Random(1003)
    bad = 0
    g = pk.g
    for i in range(200):
        sk = ibe.extract(pk, msk, f"user{i}", rng)
        bad += not ibe.key_is_valid(pk, sk)
        delta = g ** rng.randrange(1, pk.q)
        for tampered in (
            ibe.IbeSecretKey(sk.sk1 * delta, sk.sk2, sk.identity),
            ibe.IbeSecretKey(sk.sk1, sk.sk2 * delta, sk.identity),
            ibe.IbeSecretKey(sk.sk1, sk.sk2, sk.identity + b"'"),
        ):
            bad += ibe.key_is_valid(pk, tampered)
    verdict(3, bad == 0, f"200 keys valid, 600 single-element tamperings rejected, {bad} errors")


def test_criterion_04_blindness_oracles(verdict, ibe_keys, rsa_keys):
    pk, msk = ibe_keys
    rp, rs = rsa_keys
    rng = random.Random(1004)
    ids = [rng.randbytes(12).hex().encode() for _ in range(100)]
    ibe_bad = 0
    for i in ids:
        sk = ibe.extract(pk, msk, i, rng)
        h = hash_to_g1(i)
        ibe_bad += sk.sk1 != h ** msk.x1.value or sk.sk2 != h ** msk.x2.value
    rsa_bad = sum(oprf.obtain_signature(rp, rs, i, rng=rng).sigma != pow(oprf.fdh(rp, i), rs.d, rp.N) for i in ids)
    verdict(4, ibe_bad == rsa_bad == 0, f"100 ids each: IBE {ibe_bad} mismatches, RSA {rsa_bad} mismatches")


def test_criterion_05_toy_rsa(verdict):
    params, secret = oprf.RsaParams(TOY_N, TOY_E), oprf.RsaSecret(TOY_D, 61, 53)
    assert brute_mod_exp(2790, TOY_D, TOY_N) == 65 and brute_mod_exp(65, TOY_E, TOY_N) == 2790
    rng = random.Random(1005)
    forced = []
    while len(forced) < 50:
        h = rng.randrange(2, TOY_N)
        if math.gcd(h, TOY_N) == 1 and h not in forced:
            forced.append(h)
    bad = 0
    for h in forced:
        state, mu = oprf.blind_digest(params, h, rng)
        sig = oprf.unblind(params, state, oprf.sign_blinded(secret, mu))
        bad += sig.sigma != brute_mod_exp(h, TOY_D, TOY_N)
    verdict(5, bad == 0, f"N=3233 e=17 d=2753, 50 forced H1 values, {bad} mismatches")


def test_criterion_06_table2(verdict):
    rows = [compare_table2(inst, step) for inst in ("ibe", "oprf") for step in STEPS]
    strict = all(r["strict"] for r in rows)
    notes = [f"{r['instantiation']}/{r['step']}: {r['note']}" for r in rows if not r["hash_ok"]]
    undocumented = [r for r in rows if not r["hash_ok"] and not r["note"]]
    ok = strict and not undocumented
    verdict(6, ok, f"10 rows, exp/mult/pairing exact={strict}; hash notes: {'; '.join(notes) or 'none'}")


def test_criterion_07_matching_oracle(verdict):
    rng = random.Random(1007)
    diffs = 0
    for _ in range(200):
        n_tags = rng.randint(1, 60)
        tags = [rng.randbytes(32) for _ in range(n_tags)]
        b = Broker(auto_match=rng.random() < 0.5)
        n_reports, n_subs = rng.randint(0, 500), rng.randint(0, 200)
        ops = ["r"] * n_reports + ["s"] * n_subs
        rng.shuffle(ops)
        for op in ops:
            if op == "r":
                b.accept_report(ReportEnvelope(rng.choice(tags), rng.randbytes(8), 0))
            else:
                b.accept_subscription(SubscriptionUpload(b"q%d" % rng.randrange(40), rng.choice(tags), 0))
        b.match_all()
        diffs += b.marks != match_quadratic(b.reports, b.subscriptions)
    verdict(7, diffs == 0, f"200 random scenarios (<=500 reports, <=200 subscriptions), {diffs} differ")


EPOCH_SCENARIO = """
instantiation ibe
seed 1008
node a1 "air|rome"
node a2 "air|rome"
node b1 "noise|rome"
node gone "air|rome"
querier qa
querier qb
register a1
register a2
register b1
register gone
authorize qa air|rome
authorize qb noise|rome
subscribe qa air|rome
subscribe qb noise|rome
# phase 1
report a1 e0-a1
report a2 e0-a2
report gone e0-gone
report b1 e0-b1
expect qa e0-a1 e0-a2 e0-gone
expect qb e0-b1
report a1 e0-late
renew evict gone
# phase 2: the pending epoch-0 match is still delivered; nothing from epoch 1 is
report a1 e1-a1
report gone e1-gone
report b1 e1-b1
expect qa e0-late
expect qb
# phase 3: re-subscription
subscribe qa air|rome
subscribe qb noise|rome
report a2 e1-a2
expect qa e1-a1 e1-a2
expect qb e1-b1
"""


def test_criterion_08_epoch_renewal(verdict):
    r = run_scenario(EPOCH_SCENARIO)
    delivered = set().union(*r.delivered.values())
    rejected = [t["node"] for t in r.transcript if t.get("rejected")]
    ok = r.passed and r.oracle_consistent and r.cross_epoch == 0 and rejected == ["gone"] and b"e0-late" in delivered
    verdict(8, ok, f"3 phases, {r.cross_epoch} cross-epoch deliveries, evicted rejected={rejected}, failures={r.failures}")


def test_criterion_09_bench_ordering(verdict):
    i = bench("ibe", "ibe-default", 100)
    o = bench("oprf", "modern-2048-rsa", 100)
    a, b = i.ops["data_report"], o.ops["data_report"]
    ok = b["mean_ms"] < a["mean_ms"] and a["n"] >= 100 and b["n"] >= 100
    verdict(9, ok, f"report step mean: OPRF {b['mean_ms']:.3f} ms < IBE {a['mean_ms']:.3f} ms over 100 iterations")


def test_criterion_10_determinism(verdict):
    rng = random.Random(1010)
    texts = [EPOCH_SCENARIO] + [random_scenario(rng, inst, events=60, modulus_bits=1024 if inst == "oprf" else None) for inst in ("ibe", "oprf", "ibe", "oprf")]
    same = all(run_scenario(t).transcript_bytes() == run_scenario(t).transcript_bytes() for t in texts)
    verdict(10, same, f"{len(texts)} scenarios run twice, byte-identical transcripts={same}")
