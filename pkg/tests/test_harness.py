import json
import random

import pytest

from pepsi.harness import (
    BenchReport,
    STEPS,
    ScenarioError,
    bench,
    compare_table2,
    count_ops,
    parse_scenario,
    random_scenario,
    run_scenario,
)
from pepsi.harness.counting import TABLE2

SOUND = """
instantiation {inst}
seed 11
{modulus}
node n1 "Temperature|San Francisco"
querier alice
register n1
authorize alice "temperature|san francisco"
subscribe alice "temperature|san francisco"
report n1 21.5C
expect alice 21.5C
"""


def scenario(inst, body=SOUND):
    return body.format(inst=inst, modulus="modulus 1024" if inst == "oprf" else "")


@pytest.mark.parametrize("inst", ["ibe", "oprf"])
def test_single_match(inst):
    r = run_scenario(scenario(inst))
    assert r.passed, r.failures
    assert r.delivered["alice"] == {b"21.5C": 1}


@pytest.mark.parametrize("inst", ["ibe", "oprf"])
def test_non_match(inst):
    text = f"""
instantiation {inst}
{"modulus 1024" if inst == "oprf" else ""}
node n1 temperature|manhattan
querier q
register n1
authorize q pollution|manhattan
subscribe q pollution|manhattan
report n1 30
expect q
"""
    r = run_scenario(text)
    assert r.passed and not r.delivered["q"]


def test_wrong_expectation_fails():
    r = run_scenario(scenario("ibe").replace("expect alice 21.5C", "expect alice 22C"))
    assert r.verdict == "FAIL" and r.oracle_consistent


def test_expect_is_a_multiset_since_last_expect():
    text = """
node n1 a|b
node n2 a|b
querier q
register n1
register n2
authorize q a|b
subscribe q a|b
report n1 x
report n2 x
expect q x x
report n1 y
drain q
expect q y
expect q
"""
    assert run_scenario(text).passed


def test_retroactive_delivery():
    text = """
node n1 a|b
querier q
register n1
report n1 early
authorize q a|b
subscribe q a|b
expect q early
"""
    assert run_scenario(text).passed


def test_renew_scenario():
    text = """
instantiation ibe
seed 3
node good x|y
node bad x|y
querier q
register good
register bad
authorize q x|y
subscribe q x|y
report good one
report bad two
expect q one two
renew evict bad
report good three
report bad stale
expect q
subscribe q x|y
report good four
expect q three four
"""
    # 'three' was stored in epoch 1 and matches the re-subscription retroactively
    r = run_scenario(text)
    assert r.passed, r.failures
    rejected = [t for t in r.transcript if t.get("rejected")]
    assert len(rejected) == 1 and rejected[0]["node"] == "bad"
    renew = next(t for t in r.transcript if t["event"] == "renew")
    assert renew["redistributed"] == ["good"] and renew["purged"] == [1, 2]


@pytest.mark.parametrize(
    "text, line",
    [
        ("instantiation rsa", 1),
        ("seed x", 1),
        ("querier q\nexpect r", 2),
        ("\n\nregister n9", 3),
        ("node a x\nnode a y", 2),
        ("instantiation oprf\nrenew", 2),
        ("bogus", 1),
        ('node a "unterminated', 1),
        ("querier q\nauthorize q", 2),
        ("node a x\nrenew now", 2),
    ],
)
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert info.value.line == line and str(info.value).startswith(f"line {line}:")


def test_runtime_errors_carry_line():
    with pytest.raises(ScenarioError, match="line 3"):
        run_scenario("node n a\nquerier q\nreport n x\n")
    with pytest.raises(ScenarioError, match="line 3"):
        run_scenario("node n a\nquerier q\nsubscribe q a\n")


def test_comments_and_quoting():
    sc = parse_scenario('# header\nnode n1 "Noise|New  York"  # trailing\nquerier q\n')
    assert sc.nodes == {"n1": b"noise|new york"} and sc.queriers == ["q"]


def test_transcript_has_both_forms():
    r = run_scenario(scenario("ibe"))
    rep = next(t for t in r.transcript if t["event"] == "report")
    assert rep["unstripped"]["sender"] == "n1"
    assert rep["stripped"] == rep["unstripped"]["envelope"]
    assert b"n1" not in bytes.fromhex(rep["stripped"])


@pytest.mark.parametrize("inst", ["ibe", "oprf"])
def test_determinism(inst):
    text = random_scenario(random.Random(8), inst, modulus_bits=1024 if inst == "oprf" else None)
    a, b = run_scenario(text), run_scenario(text)
    assert a.transcript_bytes() == b.transcript_bytes()
    other = parse_scenario(text)
    other.seed += 1
    assert run_scenario(other).transcript_bytes() != a.transcript_bytes()


def test_randomized_schedule_matches_oracle():
    rng = random.Random(9)
    for _ in range(5):
        r = run_scenario(random_scenario(rng, "ibe", nodes=5, ids=3, queriers=4, events=30))
        assert r.passed and r.oracle_consistent, r.failures


def test_broker_never_sees_cleartext():
    text = scenario("ibe")
    r = run_scenario(text)
    for rec in r.transcript:
        for key in ("stripped", "upload"):
            if key in rec:
                raw = bytes.fromhex(rec[key])
                assert b"temperature" not in raw and b"21.5C" not in raw


@pytest.mark.parametrize("inst", ["ibe", "oprf"])
@pytest.mark.parametrize("step", STEPS)
def test_counts_match_table(inst, step):
    r = compare_table2(inst, step)
    assert r["strict"], r
    if (inst, step) == ("ibe", "data_report"):
        assert not r["hash_ok"] and r["measured"]["hashes"] == 3 and r["note"]
    else:
        assert r["hash_ok"], r


def test_count_examples():
    c = count_ops("ibe", "data_report")
    assert (c.pairings, c.exponentiations) == (2, 1)
    c = count_ops("oprf", "data_report")
    assert (c.pairings, c.exponentiations) == (0, 0)
    assert count_ops("ibe", "query_subscription").pairings == 2


def test_counts_are_stable():
    for inst in TABLE2:
        for step in STEPS:
            assert count_ops(inst, step, random.Random(1)).as_dict() == count_ops(inst, step, random.Random(2)).as_dict()


def test_verification_is_separate():
    c = count_ops("ibe", "query_authorization")
    assert c.pairings == 0 and c.checks.pairings == 4
    c = count_ops("oprf", "node_registration")
    assert c.checks.exp_calls == 1


def test_unknown_step():
    with pytest.raises(ValueError):
        count_ops("ibe", "teleport")
    with pytest.raises(ValueError):
        count_ops("rsa", "data_report")


def test_bench_record():
    rep = bench("oprf", "paper-1024-rsa", 100)
    assert all(s["n"] >= 100 for s in rep.ops.values())
    back = BenchReport.from_json(rep.to_json())
    assert back == rep
    d = json.loads(rep.to_json())
    assert d["format"] == "pepsi-bench/1" and "note" in d["hardware"]
    assert all(s["p50_ms"] <= s["p95_ms"] for s in rep.ops.values())


def test_bench_contract():
    with pytest.raises(ValueError):
        bench("ibe", "ibe-default", 10)
    with pytest.raises(ValueError):
        bench("ibe", "quantum")
    with pytest.raises(ValueError):
        BenchReport.from_json('{"format": "other"}')
