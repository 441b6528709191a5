"""Why address taint finds coins that transaction taint misses.

A user deposits into a mixer address M_recv. The mixer never spends that
deposit toward the user. Instead it pays the user from a different pool
coin (C -> D -> B), and later sweeps the deposit into the same address C.
Following spends from the deposit never reaches B; following addresses does.
"""
from addrtaint import build_index, reference_chain_T1, run_method
from addrtaint.sim import T1_TXIDS

txs, truth = reference_chain_T1()
chain = build_index(txs)
case = truth.cases()[0]
names = {v: k for k, v in T1_TXIDS.items()}


def show(ref):
    out = chain.output(ref)
    return f"{names[ref.txid]}:{ref.vout} -> {out.address} ({out.value:,} sat)"


print("chain, in time order:")
for tx in chain.transactions:
    ins = ", ".join(chain.output(i).address for i in tx.inputs) or "coinbase"
    outs = ", ".join(f"{o.address} {o.value:,}" for o in tx.outputs)
    print(f"  t={tx.timestamp:<4} {names[tx.txid]}: {ins} => {outs}")

print("\nthe coin the user actually received:")
for ref in case.targets:
    print("  ", show(ref))

for method in ("poison", "m1"):
    result = run_method(chain, case, method)
    found = result.contains_all(case.targets)
    print(f"\n{method}: {len(result.tainted_outputs)} tainted outputs, target {'found' if found else 'missed'}")
    for ref in sorted(result.tainted_outputs, key=lambda r: names[r.txid]):
        print("   ", show(ref))
    if method == "m1":
        print("    tainted addresses:", ", ".join(sorted(result.tainted_addresses)))
