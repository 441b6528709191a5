"""Input sharing versus output sharing on a small random mixer chain.

Input sharing merges addresses spent together in one transaction, which
usually means one owner. Output sharing also merges addresses paid together,
which is much looser. The forward taint methods are a closure over exactly
these links, so every taint set is a union of clusters.
"""
from addrtaint import TaintWindow, build_index, run_method, simulate
from addrtaint.case import seed_time
from addrtaint.clustering import cluster_addresses, cluster_of
from addrtaint.sim import random_scenario

txs, truth = simulate(random_scenario(3, background_txs=400))
chain = build_index(txs)
case = truth.cases()[0]
window = TaintWindow(seed_time(chain, case))

for label, opts in (("input sharing", dict(input_sharing=True)),
                    ("input + output sharing", dict(input_sharing=True, output_sharing=True))):
    parts = cluster_addresses(chain, window, **opts)
    sizes = sorted((len(p) for p in parts), reverse=True)
    print(f"{label}: {len(parts)} clusters, largest {sizes[:5]}")

m3 = run_method(chain, case, "m3")
partition = cluster_addresses(chain, window, input_sharing=True, output_sharing=True)
covered = {a for addr in m3.tainted_addresses for a in cluster_of(partition, addr)}
print(f"\nm3 tainted {len(m3.tainted_addresses)} addresses; "
      f"their clusters hold {len(covered)} addresses (same set)")
