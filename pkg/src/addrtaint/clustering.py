"""Window-scoped input-sharing and output-sharing address clustering."""
from __future__ import annotations

import json

from .chain import ChainIndex
from .taint import TaintWindow


class DisjointSet:
    """Union-find over hashable items with path halving and union by size."""

    def __init__(self, items=()):
        self.parent = {}
        self.size = {}
        for x in items:
            self.add(x)

    def add(self, x):
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra

    def groups(self):
        out = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return list(out.values())


def cluster_addresses(chain: ChainIndex, window: TaintWindow, *,
                      input_sharing: bool = True, output_sharing: bool = False) -> list[list[str]]:
    """Partition every address incident to the window's propagation range.

    Addresses are merged when they appear together among the inputs
    (`input_sharing`) or among the outputs (`output_sharing`) of one window
    transaction. Clusters and their members come back sorted.
    """
    ds = DisjointSet()
    for p in chain.window_range(window.taint_start, window.taint_end):
        ins = chain.input_addresses[p]
        outs = chain.output_addresses[p]
        for a in ins:
            ds.add(a)
        for a in outs:
            ds.add(a)
        if input_sharing:
            for a in ins[1:]:
                ds.union(ins[0], a)
        if output_sharing:
            for a in outs[1:]:
                ds.union(outs[0], a)
    return sorted(sorted(g) for g in ds.groups())


def cluster_input_sharing(chain: ChainIndex, window: TaintWindow) -> list[list[str]]:
    return cluster_addresses(chain, window, input_sharing=True, output_sharing=False)


def cluster_output_sharing(chain: ChainIndex, window: TaintWindow) -> list[list[str]]:
    return cluster_addresses(chain, window, input_sharing=False, output_sharing=True)


def cluster_of(partition, address):
    for group in partition:
        if address in group:
            return group
    return None


def format_clusters(partition, fmt: str = "table") -> str:
    """One cluster per line: space-separated for `table`, a JSON array for `jsonl`."""
    if fmt == "jsonl":
        lines = [json.dumps(g, separators=(",", ":")) for g in partition]
    else:
        lines = [" ".join(g) for g in partition]
    return "".join(line + "\n" for line in lines)
