"""
Scenarios, nonce renewal and operation counts
=============================================
"""

from pepsi.harness import STEPS, compare_table2, run_scenario

text = """
instantiation ibe
seed 5
node a "air|rome"
node x "air|rome"
querier q
register a
register x
authorize q air|rome
subscribe q air|rome
report a before
report x also-before
expect q before also-before
renew evict x
report x after-eviction
subscribe q air|rome
report a after
expect q after
"""

result = run_scenario(text)
print("verdict:", result.verdict)
for rec in result.transcript:
    if rec.get("rejected"):
        print("broker rejected report from", rec["node"], "->", rec["rejected"])

print()
print(f"{'step':22s} {'inst':5s} exp mul pair hash")
for inst in ("ibe", "oprf"):
    for step in STEPS:
        r = compare_table2(inst, step)
        m = r["measured"]
        flag = "" if r["hash_ok"] else "  (" + r["note"] + ")"
        print(f"{step:22s} {inst:5s} {m['exponentiations']:3d} {m['multiplications']:3d} {m['pairings']:4d} {m['hashes']:4d}{flag}")
