"""A mixer with separate receiving and paying pools.

Deposits land in one pool and payouts come from another, and the two never
meet inside the analysis window. No forward method can cross that gap. If a
single withdrawal from an earlier session is known, tracing it backward
reveals the paying pool, and forward tainting from there recovers the
payouts of the case under study.
"""
from addrtaint import build_index, run_method, simulate
from addrtaint.sim import disjoint_pool_scenario

txs, truth = simulate(disjoint_pool_scenario())
chain = build_index(txs)
print(f"simulated {len(txs):,} transactions, {len(truth.deposits)} deposits")
print("receiving pool:", ", ".join(a for a in truth.pool_addresses if "in" in a))
print("paying pool:   ", ", ".join(a for a in truth.pool_addresses if "out" in a))

for case in truth.cases():
    print(f"\ncase {case.case_id}: {len(case.targets)} target output(s)")
    methods = ["m1", "m2", "m3"] + (["m4"] if case.known_withdrawals else [])
    for m in methods:
        result = run_method(chain, case, m)
        hit = sum(r in result.tainted_outputs for r in case.targets)
        print(f"  {m}: {len(result.tainted_outputs):>6,} tainted, {hit}/{len(case.targets)} targets")
    if not case.known_withdrawals:
        print("  (no earlier withdrawal known, so the backward step is unavailable)")
